#include "phycine/ad/tensor.hpp"

#include <cmath>
#include <sstream>

#include "phycine/common/error.hpp"

namespace phycine::ad {

int shape_size(const std::vector<int>& shape) {
    long long n = 1;
    for (int d : shape) {
        if (d <= 0) raise(ErrorKind::Shape, "non-positive dimension in shape " + shape_str(shape));
        n *= d;
    }
    if (n > (1LL << 31)) raise(ErrorKind::Shape, "tensor too large: " + shape_str(shape));
    return static_cast<int>(n);
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor Tensor::zeros(const std::vector<int>& shape) {
    Tensor t;
    t.shape = shape;
    t.data.assign(shape_size(shape), 0.0);
    return t;
}

Tensor Tensor::full(const std::vector<int>& shape, double value) {
    Tensor t;
    t.shape = shape;
    t.data.assign(shape_size(shape), value);
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t;
    t.shape = {1};
    t.data.assign(1, value);
    return t;
}

Tensor Tensor::of(const std::vector<int>& shape, std::vector<double> values) {
    if (shape_size(shape) != static_cast<int>(values.size()))
        raise(ErrorKind::Shape, "shape " + shape_str(shape) + " does not match " +
                                    std::to_string(values.size()) + " values");
    Tensor t;
    t.shape = shape;
    t.data = std::move(values);
    return t;
}

double Tensor::value() const {
    if (!is_scalar()) raise(ErrorKind::Shape, "value() on non-scalar tensor " + shape_str(shape));
    return data[0];
}

static int flat_index(const std::vector<int>& shape, const std::vector<int>& idx) {
    if (idx.size() != shape.size())
        raise(ErrorKind::Shape, "index rank mismatch for shape " + shape_str(shape));
    int flat = 0;
    for (std::size_t a = 0; a < shape.size(); ++a) {
        if (idx[a] < 0 || idx[a] >= shape[a])
            raise(ErrorKind::Shape, "index out of range for shape " + shape_str(shape));
        flat = flat * shape[a] + idx[a];
    }
    return flat;
}

double Tensor::at(const std::vector<int>& idx) const { return data[flat_index(shape, idx)]; }
double& Tensor::at(const std::vector<int>& idx) { return data[flat_index(shape, idx)]; }

Tensor Tensor::detached() const {
    Tensor t;
    t.shape = shape;
    t.data = data;
    return t;
}

bool Tensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

}  // namespace phycine::ad
