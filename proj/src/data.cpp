#include "iqn/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string_view>

namespace iqn {

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform01();
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

bool parse_double(std::string_view tok, double& out) {
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(std::string_view tok, std::uint32_t& out) {
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, out);
  return ec == std::errc() && ptr == end && out >= 1;
}

int map_label(double raw, std::size_t line_no, std::string_view tok) {
  if (raw == 1.0) return 1;
  if (raw == -1.0 || raw == 0.0 || raw == 2.0) return 0;
  throw MalformedLine(line_no, "unsupported label '" + std::string(tok) + "'");
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

LibsvmData parse_libsvm(std::istream& in) {
  LibsvmData data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.erase(hash);
    }
    std::string_view rest(line);
    auto next_token = [&rest]() -> std::string_view {
      const auto start = rest.find_first_not_of(" \t\r");
      if (start == std::string_view::npos) {
        rest = {};
        return {};
      }
      rest.remove_prefix(start);
      const auto stop = rest.find_first_of(" \t\r");
      const auto tok = rest.substr(0, stop);
      rest.remove_prefix(stop == std::string_view::npos ? rest.size() : stop);
      return tok;
    };

    const std::string_view label_tok = next_token();
    if (label_tok.empty()) continue;

    double raw_label = 0.0;
    if (!parse_double(label_tok, raw_label)) {
      throw MalformedLine(line_no, "non-numeric label '" + std::string(label_tok) + "'");
    }
    SparseRow row;
    row.label = map_label(raw_label, line_no, label_tok);

    for (auto tok = next_token(); !tok.empty(); tok = next_token()) {
      const auto colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw MalformedLine(line_no, "expected index:value, got '" + std::string(tok) + "'");
      }
      std::uint32_t index = 0;
      double value = 0.0;
      if (!parse_index(tok.substr(0, colon), index)) {
        throw MalformedLine(line_no, "bad feature index in '" + std::string(tok) + "'");
      }
      if (!parse_double(tok.substr(colon + 1), value)) {
        throw MalformedLine(line_no, "bad feature value in '" + std::string(tok) + "'");
      }
      if (!row.indices.empty() && index <= row.indices.back()) {
        throw MalformedLine(line_no, "feature indices must be strictly increasing");
      }
      row.indices.push_back(index);
      row.values.push_back(value);
    }
    if (!row.indices.empty()) {
      data.dim = std::max<std::size_t>(data.dim, row.indices.back());
    }
    data.rows.push_back(std::move(row));
  }
  if (data.rows.empty()) {
    throw Error(ErrorCode::kEmptyDataset, "no samples in LIBSVM input");
  }
  return data;
}

LibsvmData load_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open dataset '" + path + "'");
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, const std::vector<SparseRow>& rows) {
  for (const auto& row : rows) {
    out << (row.label == 1 ? "+1" : "-1");
    for (std::size_t k = 0; k < row.indices.size(); ++k) {
      out << ' ' << row.indices[k] << ':' << shortest(row.values[k]);
    }
    out << '\n';
  }
}

QuadraticComponents generate_quadratic(const GeneratorSpec& spec) {
  if (spec.d == 0 || spec.d % 2 != 0) {
    throw Error(ErrorCode::kInvalidSpec, "dimension must be even and positive");
  }
  if (spec.n == 0) throw Error(ErrorCode::kInvalidSpec, "n must be positive");
  if (!(spec.xi >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "xi must be >= 0");
  if (!(spec.b_max >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "b_max must be >= 0");

  const double hi = std::pow(10.0, spec.xi / 2.0);
  const double lo = std::pow(10.0, -spec.xi / 2.0);
  const auto d = static_cast<Eigen::Index>(spec.d);
  Rng rng(spec.seed);
  QuadraticComponents q;
  q.a_diag.reserve(spec.n);
  q.b.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    Vector a(d);
    for (Eigen::Index j = 0; j < d / 2; ++j) a(j) = rng.uniform(1.0, hi);
    for (Eigen::Index j = d / 2; j < d; ++j) a(j) = rng.uniform(lo, 1.0);
    Vector b(d);
    for (Eigen::Index j = 0; j < d; ++j) b(j) = rng.uniform(0.0, spec.b_max);
    q.a_diag.push_back(std::move(a));
    q.b.push_back(std::move(b));
  }
  return q;
}

Vector initial_point(std::size_t d, double alpha_scale, std::uint64_t seed) {
  Rng rng(seed);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = rng.uniform01();
  return alpha_scale * v;
}

std::vector<SparseRow> generate_logistic_rows(std::size_t n, std::size_t d,
                                              double density,
                                              std::uint64_t seed) {
  Rng rng(seed);
  Vector w(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < w.size(); ++j) w(j) = rng.normal();
  w /= std::sqrt(static_cast<double>(d));
  std::vector<SparseRow> rows(n);
  for (auto& row : rows) {
    double t = 0.0;
    for (std::uint32_t j = 1; j <= d; ++j) {
      if (rng.uniform01() >= density) continue;
      const double v = rng.normal();
      row.indices.push_back(j);
      row.values.push_back(v);
      t += v * w(j - 1);
    }
    const double prob = 1.0 / (1.0 + std::exp(-4.0 * t));
    row.label = rng.uniform01() < prob ? 1 : 0;
  }
  return rows;
}

void write_quadratic(std::ostream& out, const QuadraticComponents& q) {
  const std::size_t d = q.a_diag.empty() ? 0 : q.a_diag.front().size();
  out << "# quadratic components: f_i(x) = 1/2 <x, diag(a_i) x> + <b_i, x>\n";
  out << q.a_diag.size() << ' ' << d << '\n';
  for (std::size_t i = 0; i < q.a_diag.size(); ++i) {
    out << 'a';
    for (Eigen::Index j = 0; j < q.a_diag[i].size(); ++j) out << ' ' << shortest(q.a_diag[i](j));
    out << "\nb";
    for (Eigen::Index j = 0; j < q.b[i].size(); ++j) out << ' ' << shortest(q.b[i](j));
    out << '\n';
  }
}

QuadraticComponents read_quadratic(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] != '#') return true;
    }
    return false;
  };
  if (!next_line()) throw Error(ErrorCode::kEmptyDataset, "empty quadratic file");
  std::size_t n = 0, d = 0;
  {
    std::istringstream hdr(line);
    if (!(hdr >> n >> d) || n == 0 || d == 0) {
      throw MalformedLine(line_no, "expected '<n> <d>' header");
    }
  }
  auto read_vec = [&](char tag) {
    if (!next_line()) throw MalformedLine(line_no, "unexpected end of file");
    std::istringstream ls(line);
    char t = 0;
    ls >> t;
    if (t != tag) throw MalformedLine(line_no, std::string("expected '") + tag + "' row");
    Vector v(static_cast<Eigen::Index>(d));
    std::string tok;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (!(ls >> tok) || !parse_double(tok, v(j))) {
        throw MalformedLine(line_no, "bad or missing value");
      }
    }
    if (ls >> tok) throw MalformedLine(line_no, "too many values");
    return v;
  };
  QuadraticComponents q;
  for (std::size_t i = 0; i < n; ++i) {
    q.a_diag.push_back(read_vec('a'));
    q.b.push_back(read_vec('b'));
  }
  return q;
}

}  // namespace iqn
