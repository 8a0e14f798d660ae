#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "drmpc/nlp.hpp"

using namespace drmpc;
using namespace drmpc::nlp;

namespace {

VariableBlock free_block(const std::string& name, int dim, const Vec& init) {
    VariableBlock b;
    b.name = name;
    b.dim = dim;
    b.initial = init;
    return b;
}

Objective quadratic_objective(const Vec& target) {
    Objective obj;
    const int n = static_cast<int>(target.size());
    obj.value = [target](const Vec& x) { return (x - target).squaredNorm(); };
    obj.gradient = [target](const Vec& x, Vec& g) { g = 2.0 * (x - target); };
    obj.hessian = [n](const Vec&, std::vector<Triplet>& h) {
        for (int i = 0; i < n; ++i) h.emplace_back(i, i, 2.0);
    };
    return obj;
}

} // namespace

TEST_CASE("assemble indexing and validation") {
    auto obj = quadratic_objective(Vec::Zero(7));
    auto p = assemble({free_block("a", 3, Vec::Zero(3)),
                       free_block("b", 4, Vec::Zero(4))},
                      {}, obj);
    CHECK(p.num_vars() == 7);
    CHECK(p.offset("a") == 0);
    CHECK(p.offset("b") == 3);
    CHECK(p.block_dim("b") == 4);

    CHECK_THROWS_AS(assemble({free_block("a", 3, Vec::Zero(3)),
                              free_block("a", 2, Vec::Zero(2))},
                             {}, quadratic_objective(Vec::Zero(5))),
                    std::invalid_argument);

    ConstraintGroup bad;
    bad.name = "c";
    bad.dim = 1;
    bad.depends = {"missing"};
    bad.eval = [](const Vec&, Eigen::Ref<Vec> out) { out(0) = 0.0; };
    bad.jacobian = [](const Vec&, int, std::vector<Triplet>&) {};
    CHECK_THROWS_AS(assemble({free_block("a", 2, Vec::Zero(2))}, {bad},
                             quadratic_objective(Vec::Zero(2))),
                    std::invalid_argument);
}

TEST_CASE("unconstrained quadratic bowl") {
    Vec target(3);
    target << 1.0, -2.0, 0.5;
    auto p = assemble({free_block("x", 3, Vec::Zero(3))}, {},
                      quadratic_objective(target));
    auto sol = solve_local(p);
    CHECK(sol.status == SolveStatus::OptimalLocal);
    CHECK((sol.point - target).norm() < 1e-6);
    CHECK(sol.kkt_residual <= 1e-6);
}

TEST_CASE("active bound and active linear constraint") {
    SUBCASE("bound form") {
        VariableBlock b;
        b.name = "x";
        b.dim = 1;
        b.lower = Vec::Constant(1, 1.0);
        b.upper = Vec::Constant(1, 10.0);
        b.initial = Vec::Constant(1, 5.0);
        Objective obj;
        obj.value = [](const Vec& x) { return x(0); };
        obj.gradient = [](const Vec&, Vec& g) { g = Vec::Ones(1); };
        auto p = assemble({b}, {}, obj);
        auto sol = solve_local(p);
        CHECK(sol.status == SolveStatus::OptimalLocal);
        CHECK(sol.point(0) == doctest::Approx(1.0).epsilon(1e-8));
    }

    SUBCASE("functional constraint form, minimize x s.t. 1 - x <= 0") {
        ConstraintGroup c;
        c.name = "ge1";
        c.kind = ConstraintKind::Inequality;
        c.dim = 1;
        c.depends = {"x"};
        c.eval = [](const Vec& x, Eigen::Ref<Vec> out) { out(0) = 1.0 - x(0); };
        c.jacobian = [](const Vec&, int row0, std::vector<Triplet>& out) {
            out.emplace_back(row0, 0, -1.0);
        };
        Objective obj;
        obj.value = [](const Vec& x) { return x(0); };
        obj.gradient = [](const Vec&, Vec& g) { g = Vec::Ones(1); };
        auto p = assemble({free_block("x", 1, Vec::Constant(1, 3.0))}, {c}, obj);
        auto sol = solve_local(p);
        CHECK(sol.status == SolveStatus::OptimalLocal);
        CHECK(sol.point(0) == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(sol.feasibility <= 1e-6);
    }
}

TEST_CASE("equality-constrained quadratic matches the KKT solve") {
    std::mt19937 rng(17);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int n = 5, m = 2;
    Mat root(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) root(i, j) = gauss(rng);
    const Mat H = root * root.transpose() + 0.5 * Mat::Identity(n, n);
    Vec c(n);
    for (int i = 0; i < n; ++i) c(i) = gauss(rng);
    Mat A(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = gauss(rng);
    Vec b(m);
    for (int i = 0; i < m; ++i) b(i) = gauss(rng);

    // closed-form KKT solution
    Mat kkt = Mat::Zero(n + m, n + m);
    kkt.topLeftCorner(n, n) = H;
    kkt.topRightCorner(n, m) = A.transpose();
    kkt.bottomLeftCorner(m, n) = A;
    Vec rhs(n + m);
    rhs << -c, b;
    const Vec xstar = kkt.fullPivLu().solve(rhs).head(n);

    Objective obj;
    obj.value = [H, c](const Vec& x) { return 0.5 * x.dot(H * x) + c.dot(x); };
    obj.gradient = [H, c](const Vec& x, Vec& g) { g = H * x + c; };
    obj.hessian = [H, n](const Vec&, std::vector<Triplet>& h) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) h.emplace_back(i, j, H(i, j));
    };
    ConstraintGroup eq;
    eq.name = "lin";
    eq.kind = ConstraintKind::Equality;
    eq.dim = m;
    eq.depends = {"x"};
    eq.eval = [A, b](const Vec& x, Eigen::Ref<Vec> out) { out = A * x - b; };
    eq.jacobian = [A, n, m](const Vec&, int row0, std::vector<Triplet>& out) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) out.emplace_back(row0 + i, j, A(i, j));
    };
    auto p = assemble({free_block("x", n, Vec::Zero(n))}, {eq}, obj);
    auto sol = solve_local(p);
    CHECK(sol.status == SolveStatus::OptimalLocal);
    CHECK((sol.point - xstar).norm() < 1e-6);
}

TEST_CASE("solver is deterministic") {
    Vec target(4);
    target << 0.3, -1.1, 2.0, 0.0;
    auto make = [&]() {
        ConstraintGroup c;
        c.name = "ball";
        c.kind = ConstraintKind::Inequality;
        c.dim = 1;
        c.depends = {"x"};
        c.eval = [](const Vec& x, Eigen::Ref<Vec> out) {
            out(0) = x.squaredNorm() - 1.0;
        };
        c.jacobian = [](const Vec& x, int row0, std::vector<Triplet>& out) {
            for (int j = 0; j < x.size(); ++j)
                out.emplace_back(row0, j, 2.0 * x(j));
        };
        c.hessian = [](const Vec& x, const Vec& mult, std::vector<Triplet>& out) {
            for (int j = 0; j < x.size(); ++j)
                out.emplace_back(j, j, 2.0 * mult(0));
        };
        return assemble({free_block("x", 4, Vec::Zero(4))}, {c},
                        quadratic_objective(target));
    };
    auto s1 = solve_local(make());
    auto s2 = solve_local(make());
    CHECK(s1.status == s2.status);
    CHECK(s1.objective_value == s2.objective_value);  // bit-for-bit
    CHECK((s1.point - s2.point).norm() == 0.0);
    CHECK(s1.iterations == s2.iterations);
}

TEST_CASE("contradictory constraints report infeasible") {
    ConstraintGroup c;
    c.name = "contradiction";
    c.kind = ConstraintKind::Inequality;
    c.dim = 2;
    c.depends = {"x"};
    c.eval = [](const Vec& x, Eigen::Ref<Vec> out) {
        out(0) = 1.0 - x(0);   // x >= 1
        out(1) = x(0) + 1.0;   // x <= -1
    };
    c.jacobian = [](const Vec&, int row0, std::vector<Triplet>& out) {
        out.emplace_back(row0, 0, -1.0);
        out.emplace_back(row0 + 1, 0, 1.0);
    };
    auto p = assemble({free_block("x", 1, Vec::Zero(1))}, {c},
                      quadratic_objective(Vec::Zero(1)));
    auto sol = solve_local(p);
    CHECK(sol.status == SolveStatus::Infeasible);
    CHECK(sol.feasibility > 1e-6);
}

TEST_CASE("feasible start converges without leaving the feasible set at exit") {
    // The augmented-Lagrangian path may pass through transiently infeasible
    // inner iterates; the returned point must be feasible again.
    ConstraintGroup c;
    c.name = "cap";
    c.kind = ConstraintKind::Inequality;
    c.dim = 1;
    c.depends = {"x"};
    c.eval = [](const Vec& x, Eigen::Ref<Vec> out) { out(0) = x.sum() - 1.0; };
    c.jacobian = [](const Vec& x, int row0, std::vector<Triplet>& out) {
        for (int j = 0; j < x.size(); ++j) out.emplace_back(row0, j, 1.0);
    };
    Vec target = Vec::Ones(3);  // unconstrained optimum sums to 3 > 1
    auto p = assemble({free_block("x", 3, Vec::Zero(3))}, {c},
                      quadratic_objective(target));
    auto sol = solve_local(p);
    CHECK(sol.status == SolveStatus::OptimalLocal);
    CHECK(sol.feasibility <= 1e-6);
    CHECK(sol.point.sum() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("check_derivatives") {
    SUBCASE("clean linear objective") {
        Objective obj;
        obj.value = [](const Vec& x) { return 3.0 * x(0) - x(1); };
        obj.gradient = [](const Vec&, Vec& g) {
            g.resize(2);
            g << 3.0, -1.0;
        };
        auto p = assemble({free_block("x", 2, Vec::Zero(2))}, {}, obj);
        CHECK(check_derivatives(p, Vec::Zero(2)) < 1e-9);
    }

    SUBCASE("a corrupted Jacobian entry is detected") {
        ConstraintGroup c;
        c.name = "lin";
        c.kind = ConstraintKind::Inequality;
        c.dim = 1;
        c.depends = {"x"};
        c.eval = [](const Vec& x, Eigen::Ref<Vec> out) { out(0) = x(0) + x(1); };
        c.jacobian = [](const Vec&, int row0, std::vector<Triplet>& out) {
            out.emplace_back(row0, 0, 1.1);  // off by 0.1
            out.emplace_back(row0, 1, 1.0);
        };
        auto p = assemble({free_block("x", 2, Vec::Zero(2))}, {c},
                          quadratic_objective(Vec::Zero(2)));
        CHECK(check_derivatives(p, Vec::Zero(2)) >= 0.09);
    }
}

TEST_CASE("dump writes variables and constraint values") {
    auto p = assemble({free_block("x", 2, Vec::Zero(2))}, {},
                      quadratic_objective(Vec::Ones(2)));
    std::ostringstream os;
    dump(p, Vec::Zero(2), os);
    CHECK(os.str().find("2 vars") != std::string::npos);
    CHECK(os.str().find("objective") != std::string::npos);
}
