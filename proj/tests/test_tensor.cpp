#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "clnet/tensor.hpp"
#include "doctest.h"

using namespace clnet;

TEST_CASE("tensor construction and accessors") {
    Tensor t({2, 3});
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 6);
    for (int i = 0; i < 6; ++i) CHECK(t[i] == 0.0);

    t.m(1, 2) = 5.0;
    CHECK(t[5] == 5.0);

    Tensor f = Tensor::from({2, 2}, {1, 2, 3, 4});
    CHECK(f.m(0, 1) == 2.0);
    CHECK(f.m(1, 0) == 3.0);

    Tensor c = Tensor::from({2, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
    CHECK(c.at(1, 0, 1) == 6.0);

    CHECK(Tensor::scalar(3.5).numel() == 1);
    CHECK(Tensor::full({3}, 2.0)[2] == 2.0);

    CHECK_THROWS_AS(Tensor({0, 2}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor::from({2}, {1, 2, 3}), std::invalid_argument);
    CHECK_THROWS_AS(Tensor({4}).reshaped({5}), std::invalid_argument);

    Tensor r = Tensor::from({4}, {1, 2, 3, 4}).reshaped({2, 2});
    CHECK(r.m(1, 1) == 4.0);
}

TEST_CASE("tensor arithmetic helpers") {
    Tensor a = Tensor::from({3}, {1, 2, 3});
    Tensor b = Tensor::from({3}, {10, 20, 30});
    a.add_(b);
    CHECK(a[2] == 33.0);
    a.axpy_(-1.0, b);
    CHECK(a[1] == 2.0);
    a.scale_(2.0);
    CHECK(a[0] == 2.0);
    CHECK(a.max_abs() == 6.0);
    CHECK(a.all_finite());
    a[1] = std::nan("");
    CHECK_FALSE(a.all_finite());
}

TEST_CASE("rng is deterministic per seed") {
    Rng a(42), b(42), c(43);
    bool all_equal = true, any_diff = false;
    for (int i = 0; i < 100; ++i) {
        double x = a.uniform(), y = b.uniform(), z = c.uniform();
        all_equal = all_equal && x == y;
        any_diff = any_diff || x != z;
        CHECK(x >= 0.0);
        CHECK(x < 1.0);
    }
    CHECK(all_equal);
    CHECK(any_diff);

    Rng d(7), e(7);
    Tensor t1 = d.randn({2, 3}, 0.5);
    Tensor t2 = e.randn({2, 3}, 0.5);
    CHECK(t1.same_shape(t2));
    for (int i = 0; i < t1.numel(); ++i) CHECK(t1[i] == t2[i]);
}

TEST_CASE("rng uniformity: chi-square over 10k draws") {
    Rng rng(123);
    const int n = 10000, bins = 10;
    std::vector<int> count(bins, 0);
    for (int i = 0; i < n; ++i) count[static_cast<size_t>(rng.uniform() * bins)]++;
    double chi2 = 0.0, expect = double(n) / bins;
    for (int c : count) chi2 += (c - expect) * (c - expect) / expect;
    // df=9: mean 9, sd sqrt(18); 27.9 is the 0.1% tail
    CHECK(chi2 < 27.9);
}

TEST_CASE("rng gaussian moments") {
    Rng rng(5);
    const int n = 20000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
        double g = rng.gauss();
        sum += g;
        sumsq += g * g;
    }
    double mean = sum / n;
    double var = sumsq / n - mean * mean;
    CHECK(std::fabs(mean) < 3.0 / std::sqrt(double(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("rng helpers") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        int v = rng.uniform_int(7);
        CHECK(v >= 0);
        CHECK(v < 7);
        double u = rng.uniform(-2.0, 3.0);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
    std::vector<int> perm(20);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> sorted = perm;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 20; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
}
