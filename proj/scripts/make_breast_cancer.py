"""Export scikit-learn's breast cancer data as a [-1, 1]-scaled LIBSVM file."""
import sys

from sklearn.datasets import dump_svmlight_file, load_breast_cancer
from sklearn.preprocessing import MinMaxScaler

out = sys.argv[1] if len(sys.argv) > 1 else "tests/data/breast_cancer_scale.libsvm"
data = load_breast_cancer()
x = MinMaxScaler(feature_range=(-1, 1)).fit_transform(data.data)
y = 2 * data.target - 1
dump_svmlight_file(x, y, out, zero_based=False)
