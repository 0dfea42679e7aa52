#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace clnet {

// Dense row-major array of doubles. Feature maps use [channels, height, width],
// matrices [rows, cols], vectors [n].
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);

    static Tensor zeros(std::vector<int> shape);
    static Tensor full(std::vector<int> shape, double value);
    static Tensor from(std::vector<int> shape, std::vector<double> values);
    static Tensor scalar(double value);

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int numel() const { return static_cast<int>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

    // [C,H,W] accessors
    double& at(int c, int y, int x);
    double at(int c, int y, int x) const;
    // [rows,cols] accessors
    double& m(int r, int c) { return data_[static_cast<size_t>(r * shape_[1] + c)]; }
    double m(int r, int c) const { return data_[static_cast<size_t>(r * shape_[1] + c)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    Tensor reshaped(std::vector<int> shape) const;

    void fill(double value);
    void add_(const Tensor& other);            // elementwise +=
    void axpy_(double alpha, const Tensor& x); // this += alpha * x
    void scale_(double alpha);

    bool all_finite() const;
    double max_abs() const;
    std::string shape_str() const;

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

int shape_numel(const std::vector<int>& shape);

// Deterministic RNG used everywhere randomness is needed. Gaussian via
// Box-Muller so streams do not depend on the standard library's
// distribution internals.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double uniform();                     // [0,1)
    double uniform(double lo, double hi); // [lo,hi)
    double gauss();                       // N(0,1)
    double gauss(double mean, double stddev) { return mean + stddev * gauss(); }
    int uniform_int(int n); // [0,n)
    uint64_t next_u64() { return gen_(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[static_cast<size_t>(i)], v[static_cast<size_t>(j)]);
        }
    }

    Tensor randn(std::vector<int> shape, double stddev = 1.0);

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace clnet
