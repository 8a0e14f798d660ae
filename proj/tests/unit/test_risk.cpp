#include <doctest.h>

#include <cmath>
#include <random>

#include "../common/oracles.hpp"
#include "drmpc/predict.hpp"
#include "drmpc/risk.hpp"

using namespace drmpc;
using namespace drmpc::risk;
using drmpc::predict::NormalizedHalfspaceSample;
using drmpc::predict::ObstacleGeometry;
using drmpc::predict::ObstaclePolytope;

namespace {

ObstaclePolytope random_rectangle(std::mt19937& rng, double span = 3.0) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> upos(0.2, 1.5);
    ObstacleGeometry geom;
    geom.half_length = upos(rng);
    geom.half_width = upos(rng);
    Vec state(3);
    state << span * u(rng), span * u(rng), M_PI * u(rng);
    return predict::polytope_from_state(geom, state);
}

std::vector<NormalizedHalfspaceSample> random_samples(std::mt19937& rng, int n,
                                                      double span = 2.0) {
    std::vector<NormalizedHalfspaceSample> out;
    for (int i = 0; i < n; ++i)
        out.push_back(predict::normalized_halfspaces(random_rectangle(rng, span)));
    return out;
}

} // namespace

TEST_CASE("distance_to_safe_region") {
    ObstacleGeometry unit;
    unit.half_length = 1.0;
    unit.half_width = 1.0;
    auto box = predict::polytope_from_state(unit, Vec::Zero(3));

    SUBCASE("outside points and the center") {
        Vec y(2);
        y << 5.0, 0.0;
        CHECK(distance_to_safe_region(y, box) == 0.0);
        y << 0.0, 0.0;
        CHECK(distance_to_safe_region(y, box) == doctest::Approx(1.0));
        y << 1.0, 0.0;  // on the boundary
        CHECK(distance_to_safe_region(y, box) == 0.0);
    }

    SUBCASE("zero on every exterior point") {
        std::mt19937 rng(2);
        std::uniform_real_distribution<double> u(-4, 4);
        int exterior = 0;
        while (exterior < 200) {
            auto poly = random_rectangle(rng);
            Vec y(2);
            y << u(rng), u(rng);
            if (((poly.G * y - poly.g).array() < 0.0).all()) continue;
            ++exterior;
            CHECK(distance_to_safe_region(y, poly) == 0.0);
        }
    }

    SUBCASE("matches the grid-projection oracle") {
        std::mt19937 rng(4);
        std::uniform_real_distribution<double> u(-2.5, 2.5);
        std::uniform_real_distribution<double> upos(0.2, 1.5);
        const double resolution = 1e-3;
        for (int t = 0; t < 120; ++t) {
            ObstacleGeometry geom;
            geom.half_length = upos(rng);
            geom.half_width = upos(rng);
            Vec state(3);
            state << u(rng), u(rng), M_PI * u(rng) / 2.5;
            auto poly = predict::polytope_from_state(geom, state);
            auto boundary = oracles::rectangle_boundary(
                state(0), state(1), state(2), geom.half_length, geom.half_width,
                resolution);
            Vec y(2);
            y << u(rng), u(rng);
            const double mine = distance_to_safe_region(y, poly);
            const double oracle =
                oracles::grid_projection_distance(y, poly, boundary);
            CHECK(std::abs(mine - oracle) <= 2.0 * resolution);
        }
    }
}

TEST_CASE("cvar_empirical") {
    SUBCASE("degenerate and boundary cases") {
        std::vector<double> flat(7, 3.2);
        CHECK(cvar_empirical(flat, 0.5) == doctest::Approx(3.2));
        CHECK(cvar_empirical(flat, 0.99) == doctest::Approx(3.2));

        std::vector<double> tail{0, 0, 0, 10};
        CHECK(cvar_empirical(tail, 0.95) == doctest::Approx(10.0));
        CHECK(cvar_empirical(tail, 0.0) == doctest::Approx(2.5));

        CHECK_THROWS_AS(cvar_empirical({}, 0.5), std::invalid_argument);
        CHECK_THROWS_AS(cvar_empirical({1.0}, 1.0), std::invalid_argument);
    }

    SUBCASE("matches brute force over order statistics") {
        std::mt19937 rng(12);
        std::uniform_real_distribution<double> u(0.0, 5.0);
        std::uniform_real_distribution<double> ua(0.0, 0.99);
        for (int t = 0; t < 300; ++t) {
            const int n = 1 + t % 40;
            std::vector<double> losses(n);
            for (auto& x : losses) x = u(rng);
            const double alpha = ua(rng);
            const double mine = cvar_empirical(losses, alpha);
            const double oracle = oracles::cvar_bruteforce(losses, alpha);
            CHECK(std::abs(mine - oracle) < 1e-10);
            const double mean =
                std::accumulate(losses.begin(), losses.end(), 0.0) / n;
            const double mx = *std::max_element(losses.begin(), losses.end());
            CHECK(mine >= mean - 1e-12);
            CHECK(mine <= mx + 1e-12);
        }
    }

    SUBCASE("alpha approaching one returns the maximum") {
        std::vector<double> losses{0.3, 2.2, 1.1, 0.9};
        CHECK(cvar_empirical(losses, 1.0 - 1e-9) == doctest::Approx(2.2));
    }
}

TEST_CASE("lemma-1 equivalence of the two distance forms") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < 1000; ++t) {
        auto poly = random_rectangle(rng);
        auto norm = predict::normalized_halfspaces(poly);
        Vec y(2);
        y << u(rng), u(rng);
        const double via_min_plus = distance_to_safe_region(y, poly);
        const double via_plus_min = std::max(0.0, (norm.c * y + norm.d).minCoeff());
        CHECK(via_min_plus == doctest::Approx(via_plus_min).epsilon(1e-12));
    }
}

TEST_CASE("saa_risk") {
    std::mt19937 rng(33);

    SUBCASE("far away position has zero risk") {
        auto samples = random_samples(rng, 10, 1.0);
        Vec y(2);
        y << 100.0, 100.0;
        CHECK(saa_risk(samples, y, 0.95) == 0.0);
    }

    SUBCASE("single sample returns its distance for any alpha") {
        auto samples = random_samples(rng, 1);
        Vec y(2);
        y << 0.1, -0.2;
        const double d = std::max(0.0, (samples[0].c * y + samples[0].d).minCoeff());
        CHECK(saa_risk(samples, y, 0.3) == doctest::Approx(d));
        CHECK(saa_risk(samples, y, 0.95) == doctest::Approx(d));
    }

    SUBCASE("consistent with distance_to_safe_region of the raw polytopes") {
        std::vector<ObstaclePolytope> polys;
        std::vector<NormalizedHalfspaceSample> samples;
        for (int i = 0; i < 20; ++i) {
            polys.push_back(random_rectangle(rng, 1.5));
            samples.push_back(predict::normalized_halfspaces(polys.back()));
        }
        Vec y(2);
        y << 0.2, 0.1;
        std::vector<double> losses;
        for (const auto& p : polys) losses.push_back(distance_to_safe_region(y, p));
        CHECK(saa_risk(samples, y, 0.9) ==
              doctest::Approx(cvar_empirical(losses, 0.9)).epsilon(1e-10));
    }
}

TEST_CASE("dr_cvar_upper_bound properties") {
    std::mt19937 rng(55);
    std::uniform_real_distribution<double> u(-1, 1);

    SUBCASE("collapses to SAA at theta = 0 and dominates it, monotone in theta") {
        for (int t = 0; t < 8; ++t) {
            auto samples = random_samples(rng, 2 + t % 5, 1.2);
            Vec y(2);
            y << u(rng), u(rng);
            RiskSpec spec;
            spec.alpha = 0.9;
            spec.N = static_cast<int>(samples.size());

            spec.theta = 0.0;
            const double at0 = dr_cvar_upper_bound(samples, y, spec);
            const double saa = saa_risk(samples, y, spec.alpha);
            CHECK(std::abs(at0 - saa) <= 1e-4);

            double prev = at0;
            for (double theta : {1e-5, 1e-4, 1e-3}) {
                spec.theta = theta;
                const double v = dr_cvar_upper_bound(samples, y, spec);
                CHECK(v >= saa - 1e-6);
                CHECK(v >= prev - 1e-6);
                prev = v;
            }
        }
    }

    SUBCASE("tiny instances match the grid-search oracle") {
        // N=2, m=2 half-space pairs over scalar positions.
        std::mt19937 trng(91);
        std::uniform_real_distribution<double> tu(-1, 1);
        for (int t = 0; t < 4; ++t) {
            std::vector<NormalizedHalfspaceSample> samples(2);
            for (auto& s : samples) {
                s.c.resize(2, 1);
                s.c << 1.0, -1.0;  // unit rows in 1-D
                s.d.resize(2);
                s.d << 0.5 * tu(trng) + 0.6, 0.5 * tu(trng) + 0.6;
            }
            Vec y(1);
            y << 0.4 * tu(trng);
            RiskSpec spec;
            spec.alpha = 0.9;
            spec.N = 2;
            for (double theta : {0.0, 5e-3}) {
                spec.theta = theta;
                const double mine = dr_cvar_upper_bound(samples, y, spec);
                const double oracle = oracles::dr_bound_grid_oracle(samples, y, spec);
                CHECK(std::abs(mine - oracle) <= 1e-3);
            }
        }
    }
}

TEST_CASE("build_dr_constraint_block") {
    std::mt19937 rng(77);
    auto samples = random_samples(rng, 1);
    RiskSpec spec;
    spec.alpha = 0.95;
    spec.delta = 0.1;
    spec.theta = 1e-4;
    spec.N = 1;

    SUBCASE("bookkeeping for N=1, m=4") {
        DrBlockLayout layout;
        layout.prefix = "blk";
        layout.self_offset = 0;
        layout.y_offset = -1;
        layout.y_fixed = Vec::Zero(2);
        auto block = build_dr_constraint_block(samples, spec, layout);
        // variables: z, lambda, s (N), rho (N*m)
        CHECK(block.var_count == 2 + 1 + 4);
        // rows: budget 1, dot N, nonneg N, quad N, simplex N
        CHECK(block.constraint_rows == 1 + 4 * 1);
        int from_groups = 0;
        for (const auto& g : block.constraints) from_groups += g.dim;
        CHECK(from_groups == block.constraint_rows);
    }

    SUBCASE("huge delta never binds: block coexists with pure tracking") {
        spec.delta = 1e6;
        spec.N = 3;
        auto many = random_samples(rng, 3);
        DrBlockLayout layout;
        layout.prefix = "blk";
        layout.y_offset = 0;  // y is the first variable block
        layout.self_offset = 2;
        auto block = build_dr_constraint_block(many, spec, layout);

        std::vector<nlp::VariableBlock> vars;
        nlp::VariableBlock yb;
        yb.name = "y";
        yb.dim = 2;
        yb.initial = Vec::Zero(2);
        vars.push_back(yb);
        for (const auto& v : block.variables) vars.push_back(v);

        Vec target(2);
        target << 30.0, -20.0;  // far from every sampled obstacle
        nlp::Objective obj;
        obj.value = [target](const Vec& x) {
            return (x.head(2) - target).squaredNorm();
        };
        obj.gradient = [target](const Vec& x, Vec& g) {
            g = Vec::Zero(x.size());
            g.head(2) = 2.0 * (x.head(2) - target);
        };
        obj.hessian = [](const Vec&, std::vector<nlp::Triplet>& h) {
            h.emplace_back(0, 0, 2.0);
            h.emplace_back(1, 1, 2.0);
        };
        auto problem = nlp::assemble(vars, block.constraints, obj);
        Vec x0 = problem.initial_point();
        init_dr_block_point(many, spec, layout, Vec::Zero(2), x0);
        problem.set_initial_point(x0);
        auto sol = nlp::solve_local(problem);
        REQUIRE(sol.status == nlp::SolveStatus::OptimalLocal);
        CHECK((sol.point.head(2) - target).norm() < 1e-4);
    }

    SUBCASE("block with pinned y reproduces the standalone evaluator") {
        spec.N = 4;
        spec.theta = 5e-4;
        auto many = random_samples(rng, 4, 1.0);
        Vec ystar(2);
        ystar << 0.15, -0.1;

        DrBlockLayout layout;
        layout.prefix = "blk";
        layout.y_offset = 0;
        layout.self_offset = 2;
        layout.include_budget = false;
        auto block = build_dr_constraint_block(many, spec, layout);

        std::vector<nlp::VariableBlock> vars;
        nlp::VariableBlock yb;
        yb.name = "y";
        yb.dim = 2;
        yb.lower = ystar;  // pin y by its bounds
        yb.upper = ystar;
        yb.initial = ystar;
        vars.push_back(yb);
        for (const auto& v : block.variables) vars.push_back(v);

        const double inv1ma = 1.0 / (1.0 - spec.alpha);
        const int z_off = block.z_offset, l_off = block.lambda_offset,
                  s_off = block.s_offset;
        const int N = spec.N;
        const double theta = spec.theta;
        nlp::Objective obj;
        obj.value = [=](const Vec& x) {
            return x(z_off) +
                   inv1ma * (theta * x(l_off) + x.segment(s_off, N).sum() / N);
        };
        obj.gradient = [=](const Vec& x, Vec& g) {
            g = Vec::Zero(x.size());
            g(z_off) = 1.0;
            g(l_off) = inv1ma * theta;
            g.segment(s_off, N).array() = inv1ma / N;
        };
        auto problem = nlp::assemble(vars, block.constraints, obj);
        Vec x0 = problem.initial_point();
        init_dr_block_point(many, spec, layout, ystar, x0);
        problem.set_initial_point(x0);
        nlp::SolveOptions opts;
        opts.tol = 1e-7;
        opts.feas_tol = 1e-9;
        opts.max_iter = 400;
        auto sol = nlp::solve_local(problem, opts);
        REQUIRE(sol.status == nlp::SolveStatus::OptimalLocal);

        const double standalone = dr_cvar_upper_bound(many, ystar, spec);
        CHECK(std::abs(sol.objective_value - standalone) <= 1e-4);
    }
}
