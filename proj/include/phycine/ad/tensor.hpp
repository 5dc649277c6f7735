#pragma once

#include <string>
#include <vector>

namespace phycine::ad {

class Tape;

int shape_size(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Dense row-major float64 tensor. A tensor is either a constant
// (node == -1) or the output of a tape node; ops accept any mix of the two.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;
    Tape* tape = nullptr;
    int node = -1;

    Tensor() = default;

    static Tensor zeros(const std::vector<int>& shape);
    static Tensor full(const std::vector<int>& shape, double value);
    static Tensor scalar(double value);
    static Tensor of(const std::vector<int>& shape, std::vector<double> values);

    int size() const { return static_cast<int>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    bool on_tape() const { return tape != nullptr && node >= 0; }
    bool is_scalar() const { return data.size() == 1; }

    // Scalar tensors only.
    double value() const;

    double at(const std::vector<int>& idx) const;
    double& at(const std::vector<int>& idx);

    // Same value, no tape link.
    Tensor detached() const;

    bool all_finite() const;
};

}  // namespace phycine::ad
