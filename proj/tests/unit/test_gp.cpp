#include <doctest.h>

#include <cmath>
#include <random>

#include "drmpc/gp.hpp"

using namespace drmpc;
using namespace drmpc::gp;

namespace {

GPHyperparams make_hyper(const Vec& ls, double sf2, double se2, double mean = 0.0) {
    GPHyperparams h;
    h.length_scales = ls;
    h.signal_variance = sf2;
    h.noise_variance = se2;
    h.prior_mean = mean;
    return h;
}

// Dense-inverse oracle: builds K explicitly and inverts.
void dense_posterior(const GPDataset& data, const GPHyperparams& h, int out_dim,
                     const Vec& x, double& mean, double& var) {
    const int m = data.size();
    Mat K(m, m);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b)
            K(a, b) = kernel_rbf(data.inputs()[a], data.inputs()[b], h);
    K.diagonal().array() += h.noise_variance;
    Vec kstar(m), centered(m);
    for (int a = 0; a < m; ++a) {
        kstar(a) = kernel_rbf(x, data.inputs()[a], h);
        centered(a) = data.outputs()[a](out_dim) - h.prior_mean;
    }
    const Mat Kinv = K.inverse();
    mean = h.prior_mean + kstar.dot(Kinv * centered);
    var = h.signal_variance - kstar.dot(Kinv * kstar);
}

} // namespace

TEST_CASE("kernel_rbf basics") {
    auto h = make_hyper(Vec::Ones(1), 1.0, 0.0);
    Vec x0 = Vec::Zero(1), x1 = Vec::Ones(1);
    CHECK(kernel_rbf(x0, x0, h) == doctest::Approx(1.0));
    CHECK(kernel_rbf(x0, x1, h) == doctest::Approx(std::exp(-0.5)));
    CHECK(kernel_rbf(x0, x1, h) == doctest::Approx(kernel_rbf(x1, x0, h)));

    auto h3 = make_hyper((Vec(3) << 2.0, 0.5, 1.0).finished(), 2.5, 0.0);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int t = 0; t < 50; ++t) {
        Vec a(3), b(3);
        for (int i = 0; i < 3; ++i) {
            a(i) = u(rng);
            b(i) = u(rng);
        }
        CHECK(kernel_rbf(a, b, h3) == doctest::Approx(kernel_rbf(b, a, h3)));
        CHECK(kernel_rbf(a, b, h3) <= 2.5 + 1e-15);
    }

    CHECK_THROWS_AS(kernel_rbf(Vec::Zero(2), Vec::Zero(3), h3),
                    std::invalid_argument);
}

TEST_CASE("window update keeps the latest M entries in order") {
    GPDataset data(3);
    CHECK(data.empty());
    for (int i = 0; i < 6; ++i)
        data = update_window(data, Vec::Constant(1, i), Vec::Constant(1, 10.0 * i));
    CHECK(data.size() == 3);
    CHECK(data.inputs()[0](0) == doctest::Approx(3.0));
    CHECK(data.inputs()[2](0) == doctest::Approx(5.0));
    CHECK(data.outputs()[0](0) == doctest::Approx(30.0));

    GPDataset one(4);
    one = update_window(one, Vec::Zero(2), Vec::Zero(2));
    CHECK(one.size() == 1);
}

TEST_CASE("single noiseless observation interpolates") {
    GPDataset data(5);
    data.add(Vec::Constant(1, 0.3), Vec::Constant(1, -1.7));
    auto model = fit(data, {make_hyper(Vec::Ones(1), 1.0, 0.0)});
    Vec mean, var;
    model.posterior(Vec::Constant(1, 0.3), mean, var);
    CHECK(mean(0) == doctest::Approx(-1.7).epsilon(1e-9));
    CHECK(var(0) < 1e-8);
}

TEST_CASE("empty window falls back to the prior by default") {
    GPDataset data(5);
    auto h = make_hyper(Vec::Ones(2), 2.0, 1e-4, 0.5);
    auto model = fit(data, {h, h});
    CHECK(model.prior_only());
    Vec mean, var;
    model.posterior(Vec::Zero(2), mean, var);
    CHECK(mean(0) == doctest::Approx(0.5));
    CHECK(var(1) == doctest::Approx(2.0));
    CHECK(model.posterior_mean_gradient(Vec::Zero(2)).norm() == 0.0);

    GPFitOptions err_opts;
    err_opts.empty_window = EmptyWindowPolicy::Error;
    CHECK_THROWS_AS(fit(data, {h, h}, err_opts), std::invalid_argument);

    GPFitOptions zero_opts;
    zero_opts.zero_fill_window = true;
    auto zero_model = fit(data, {h, h}, zero_opts);
    CHECK(!zero_model.prior_only());
    zero_model.posterior(Vec::Zero(2), mean, var);
    // window of zero outputs pulls the posterior mean toward 0 at the origin
    CHECK(std::abs(mean(0)) < 0.5);
}

TEST_CASE("posterior matches the dense-inverse oracle") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    std::uniform_real_distribution<double> upos(0.3, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
        const int n_in = 1 + trial % 3;
        const int m = 3 + trial % 5;
        Vec ls(n_in);
        for (int i = 0; i < n_in; ++i) ls(i) = upos(rng);
        auto h = make_hyper(ls, upos(rng), 1e-3 * upos(rng));
        GPDataset data(30);
        for (int i = 0; i < m; ++i) {
            Vec x(n_in), y(1);
            for (int d = 0; d < n_in; ++d) x(d) = u(rng);
            y(0) = u(rng);
            data.add(x, y);
        }
        auto model = fit(data, {h});
        for (int t = 0; t < 5; ++t) {
            Vec x(n_in);
            for (int d = 0; d < n_in; ++d) x(d) = u(rng);
            Vec mean, var;
            model.posterior(x, mean, var);
            double om, ov;
            dense_posterior(data, h, 0, x, om, ov);
            CHECK(std::abs(mean(0) - om) < 1e-8 * h.signal_variance);
            CHECK(std::abs(var(0) - std::max(0.0, ov)) < 1e-8 * h.signal_variance);
        }
    }
}

TEST_CASE("prior reversion far from data and variance bound") {
    auto h = make_hyper(Vec::Constant(1, 0.5), 1.5, 1e-4, 0.25);
    GPDataset data(10);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 6; ++i)
        data.add(Vec::Constant(1, u(rng)), Vec::Constant(1, u(rng)));
    auto model = fit(data, {h});

    Vec mean, var;
    model.posterior(Vec::Constant(1, 50.0), mean, var);  // >> 10 length scales
    CHECK(std::abs(mean(0) - 0.25) < 1e-6 * std::sqrt(1.5));
    CHECK(var(0) == doctest::Approx(1.5).epsilon(1e-9));

    for (int t = 0; t < 40; ++t) {
        model.posterior(Vec::Constant(1, 3.0 * u(rng)), mean, var);
        CHECK(var(0) <= 1.5 + 1e-10);
        CHECK(var(0) >= 0.0);
    }
}

TEST_CASE("posterior mean gradient") {
    SUBCASE("symmetric two-point dataset has zero gradient at the midpoint") {
        GPDataset data(4);
        data.add(Vec::Constant(1, -1.0), Vec::Constant(1, 2.0));
        data.add(Vec::Constant(1, 1.0), Vec::Constant(1, 2.0));
        auto model = fit(data, {make_hyper(Vec::Ones(1), 1.0, 1e-6)});
        CHECK(std::abs(model.posterior_mean_gradient(Vec::Zero(1))(0, 0)) < 1e-12);
    }

    SUBCASE("constant outputs at the prior mean give a zero gradient") {
        auto h = make_hyper(Vec::Ones(2), 1.0, 1e-6, 0.7);
        GPDataset data(5);
        std::mt19937 rng(11);
        std::uniform_real_distribution<double> u(-1, 1);
        for (int i = 0; i < 4; ++i) {
            Vec x(2);
            x << u(rng), u(rng);
            data.add(x, Vec::Constant(2, 0.7));
        }
        auto model = fit(data, {h, h});
        Vec x(2);
        x << 0.2, -0.4;
        CHECK(model.posterior_mean_gradient(x).norm() < 1e-12);
    }

    SUBCASE("matches central finite differences on random models") {
        std::mt19937 rng(19);
        std::uniform_real_distribution<double> u(-1.5, 1.5);
        auto h1 = make_hyper((Vec(2) << 0.8, 1.3).finished(), 1.2, 1e-4);
        auto h2 = make_hyper((Vec(2) << 1.1, 0.6).finished(), 0.8, 1e-4, -0.3);
        GPDataset data(10);
        for (int i = 0; i < 7; ++i) {
            Vec x(2), y(2);
            x << u(rng), u(rng);
            y << std::sin(x(0)) + 0.1 * u(rng), x(1) * x(0);
            data.add(x, y);
        }
        auto model = fit(data, {h1, h2});
        const double step = 1e-5;
        for (int t = 0; t < 10; ++t) {
            Vec x(2);
            x << u(rng), u(rng);
            const Mat jac = model.posterior_mean_gradient(x);
            for (int d = 0; d < 2; ++d) {
                Vec xp = x, xm = x;
                xp(d) += step;
                xm(d) -= step;
                Vec mp, mm, vp, vm;
                model.posterior(xp, mp, vp);
                model.posterior(xm, mm, vm);
                for (int j = 0; j < 2; ++j)
                    CHECK(std::abs(jac(j, d) - (mp(j) - mm(j)) / (2 * step)) < 1e-5);
            }
        }
    }
}

TEST_CASE("duplicating an observation never raises posterior variance") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> u(-1, 1);
    auto h = make_hyper(Vec::Ones(2), 1.0, 1e-2);
    GPDataset data(40);
    for (int i = 0; i < 6; ++i) {
        Vec x(2), y(1);
        x << u(rng), u(rng);
        y << u(rng);
        data.add(x, y);
    }
    auto base = fit(data, {h});
    GPDataset dup = data;
    dup.add(data.inputs()[2], data.outputs()[2]);
    auto more = fit(dup, {h});
    for (int t = 0; t < 10; ++t) {
        Vec x(2);
        x << 2 * u(rng), 2 * u(rng);
        Vec m0, v0, m1, v1;
        base.posterior(x, m0, v0);
        more.posterior(x, m1, v1);
        CHECK(v1(0) <= v0(0) + 1e-12);
    }
}
