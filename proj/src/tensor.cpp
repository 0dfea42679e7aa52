#include "clnet/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace clnet {

int shape_numel(const std::vector<int>& shape) {
    int n = 1;
    for (int d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    for (int d : shape_) {
        if (d <= 0) throw std::invalid_argument("Tensor: non-positive dimension");
    }
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor Tensor::zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> values) {
    Tensor t(std::move(shape));
    if (static_cast<int>(values.size()) != t.numel())
        throw std::invalid_argument("Tensor::from: value count does not match shape");
    for (int i = 0; i < t.numel(); ++i) t[i] = values[static_cast<size_t>(i)];
    return t;
}

Tensor Tensor::scalar(double value) {
    Tensor t({1});
    t[0] = value;
    return t;
}

double& Tensor::at(int c, int y, int x) {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
}

double Tensor::at(int c, int y, int x) const {
    return data_[static_cast<size_t>((c * shape_[1] + y) * shape_[2] + x)];
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (shape_numel(shape) != numel())
        throw std::invalid_argument("Tensor::reshaped: element count mismatch");
    Tensor t = *this;
    t.shape_ = std::move(shape);
    return t;
}

void Tensor::fill(double value) {
    for (auto& v : data_) v = value;
}

void Tensor::add_(const Tensor& other) {
    for (int i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += other[i];
}

void Tensor::axpy_(double alpha, const Tensor& x) {
    for (int i = 0; i < numel(); ++i) data_[static_cast<size_t>(i)] += alpha * x[i];
}

void Tensor::scale_(double alpha) {
    for (auto& v : data_) v *= alpha;
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::fabs(v));
    return m;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
    os << "]";
    return os.str();
}

double Rng::uniform() {
    // 53-bit mantissa from the top bits of the generator output
    return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0);
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gauss() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 1e-300);
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
}

int Rng::uniform_int(int n) {
    return static_cast<int>(gen_() % static_cast<uint64_t>(n));
}

Tensor Rng::randn(std::vector<int> shape, double stddev) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.numel(); ++i) t[i] = stddev * gauss();
    return t;
}

} // namespace clnet
