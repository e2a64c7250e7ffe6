#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "cryptotriage/graphlime.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace cryptotriage;
using Catch::Matchers::WithinAbs;
using testsupport::make_graph;

namespace {

struct Problem {
  Eigen::MatrixXd x;
  std::vector<double> scores;
  std::vector<std::string> names;
};

Problem random_problem(std::size_t n, std::size_t f, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Problem p;
  p.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(f));
  for (Eigen::Index i = 0; i < p.x.rows(); ++i) {
    for (Eigen::Index j = 0; j < p.x.cols(); ++j) p.x(i, j) = normal(rng);
  }
  for (std::size_t i = 0; i < n; ++i) p.scores.push_back(normal(rng));
  for (std::size_t j = 0; j < f; ++j) p.names.push_back("f" + std::to_string(j));
  return p;
}

std::vector<double> vec(const Eigen::MatrixXd& m) { return {m.data(), m.data() + m.size()}; }

double median_oracle(const std::vector<double>& v) {
  std::vector<double> d;
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) d.push_back(std::abs(v[i] - v[j]));
  }
  std::sort(d.begin(), d.end());
  const double m = d.size() % 2 ? d[d.size() / 2] : 0.5 * (d[d.size() / 2 - 1] + d[d.size() / 2]);
  return m > 0.0 ? m : 1.0;
}

/// Star-plus-noise graph: scores rise with the "degree" feature only.
TransactionGraph dependence_graph(std::mt19937_64& rng, std::vector<double>& scores) {
  const std::size_t n = 30;
  const std::vector<std::string> schema = {"total_txs", "btc_received_total", "degree", "fees_total"};
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_int_distribution<int> deg(1, 40);
  std::vector<std::vector<double>> x(n);
  scores.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = deg(rng);
    x[i] = {noise(rng), noise(rng), d, noise(rng)};
    scores[i] = std::log1p(d);
  }
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::uint32_t i = 1; i < n; ++i) edges.emplace_back(0, i);
  return make_graph(n, edges, x, schema);
}

}  // namespace

TEST_CASE("median heuristic bandwidth") {
  CHECK(median_pairwise_distance(std::vector<double>{0.0, 1.0, 3.0}) == 2.0);
  CHECK(median_pairwise_distance(std::vector<double>{0.0, 1.0, 3.0, 6.0}) == 3.0);
  CHECK(median_pairwise_distance(std::vector<double>{0.0, 0.0, 0.0, 0.0, 5.0}) == 1.0);
}

TEST_CASE("kernel construction") {
  std::mt19937_64 rng(8);
  SECTION("n=8 stack matches explicit HKH and Frobenius normalization") {
    auto p = random_problem(8, 3, rng);
    const auto stack = build_kernels(p.x, p.scores, p.names);
    REQUIRE(stack.size() == 3);
    for (std::size_t f = 0; f < 3; ++f) {
      std::vector<double> col(8);
      for (int i = 0; i < 8; ++i) col[i] = p.x(i, static_cast<Eigen::Index>(f));
      const double sigma = median_oracle(col);
      CHECK(stack.feature_bandwidths[f] == sigma);
      oracle::Dense k = oracle::zeros(8, 8);
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) k[i][j] = std::exp(-(col[i] - col[j]) * (col[i] - col[j]) / (2 * sigma * sigma));
      }
      const auto expected = oracle::center_and_normalize(k);
      const auto& got = stack.feature_kernels[f];
      for (int i = 0; i < 8; ++i) {
        for (int j = 0; j < 8; ++j) CHECK_THAT(got(i, j), WithinAbs(expected[i][j], 1e-12));
      }
      CHECK(got.rowwise().sum().cwiseAbs().maxCoeff() < 1e-9);
      CHECK(got.colwise().sum().cwiseAbs().maxCoeff() < 1e-9);
      CHECK_THAT(got.norm(), WithinAbs(1.0, 1e-12));
    }
    CHECK_THAT(stack.output_kernel.norm(), WithinAbs(1.0, 1e-12));
  }
  SECTION("constant feature gives the exact zero matrix and is inactive") {
    auto p = random_problem(6, 2, rng);
    p.x.col(1).setConstant(3.25);
    const auto stack = build_kernels(p.x, p.scores, p.names);
    CHECK(stack.feature_kernels[1].cwiseAbs().maxCoeff() == 0.0);
    CHECK_FALSE(stack.active[1]);
    CHECK(stack.active[0]);
  }
  SECTION("fewer than five nodes is rejected with the minimum in the message") {
    auto p = random_problem(2, 2, rng);
    try {
      build_kernels(p.x, p.scores, p.names);
      FAIL("expected insufficient neighborhood");
    } catch (const TriageError& e) {
      CHECK(e.code() == Errc::insufficient_neighborhood);
      CHECK(std::string(e.what()).find("insufficient-neighborhood") != std::string::npos);
      CHECK(std::string(e.what()).find("minimum 5") != std::string::npos);
    }
  }
}

TEST_CASE("HSIC lasso solver") {
  std::mt19937_64 rng(99);
  SECTION("rho at or above max c_k gives exactly zero") {
    for (int t = 0; t < 10; ++t) {
      auto p = random_problem(10, 4, rng);
      const auto stack = build_kernels(p.x, p.scores, p.names);
      const auto gram = hsic_gram(stack);
      const auto r = hsic_lasso(stack, gram.c.maxCoeff());
      for (double b : r.beta) CHECK(b == 0.0);
      CHECK(r.converged);
    }
  }
  SECTION("single feature has the scalar closed form") {
    auto p = random_problem(9, 1, rng);
    p.scores.clear();
    for (int i = 0; i < 9; ++i) p.scores.push_back(p.x(i, 0) * p.x(i, 0));
    const auto stack = build_kernels(p.x, p.scores, p.names);
    const auto c = vec(stack.feature_kernels[0]);
    const auto l = vec(stack.output_kernel);
    double c1 = 0, g11 = 0;
    for (std::size_t t = 0; t < c.size(); ++t) {
      c1 += c[t] * l[t];
      g11 += c[t] * c[t];
    }
    for (double rho : {0.0, 0.05, 0.3 * c1, c1}) {
      CHECK_THAT(hsic_lasso(stack, rho).beta[0], WithinAbs(std::max(0.0, (c1 - rho) / g11), 1e-12));
    }
  }
  SECTION("two features match a grid search") {
    for (int t = 0; t < 5; ++t) {
      auto p = random_problem(8, 2, rng);
      const auto stack = build_kernels(p.x, p.scores, p.names);
      const std::vector<std::vector<double>> kernels = {vec(stack.feature_kernels[0]), vec(stack.feature_kernels[1])};
      const double rho = 0.02 * t;
      const auto [g1, g2] = oracle::hsic_grid_search(kernels, vec(stack.output_kernel), rho);
      const auto r = hsic_lasso(stack, rho);
      CHECK_THAT(r.beta[0], WithinAbs(g1, 5e-3));
      CHECK_THAT(r.beta[1], WithinAbs(g2, 5e-3));
      const double at_solver = oracle::hsic_objective(kernels, vec(stack.output_kernel), r.beta, rho);
      const double at_grid = oracle::hsic_objective(kernels, vec(stack.output_kernel), {g1, g2}, rho);
      CHECK(at_solver <= at_grid + 1e-9);
    }
  }
  SECTION("objective never increases across sweeps") {
    for (int t = 0; t < 10; ++t) {
      auto p = random_problem(12, 6, rng);
      const auto r = hsic_lasso(build_kernels(p.x, p.scores, p.names), 0.0);
      for (std::size_t s = 1; s < r.objective_trace.size(); ++s) {
        CHECK(r.objective_trace[s] <= r.objective_trace[s - 1] + 1e-15);
      }
    }
  }
  SECTION("larger rho never grows the total weight") {
    auto p = random_problem(12, 5, rng);
    const auto stack = build_kernels(p.x, p.scores, p.names);
    double previous = std::numeric_limits<double>::infinity();
    for (double rho : {0.0, 0.001, 0.01, 0.05, 0.1, 0.2}) {
      const auto r = hsic_lasso(stack, rho, 1e-10);
      double total = 0.0;
      for (double b : r.beta) {
        CHECK(b >= 0.0);
        total += b;
      }
      CHECK(total <= previous + 1e-6);
      previous = total;
    }
  }
  SECTION("permuting features permutes the weights") {
    auto p = random_problem(10, 4, rng);
    const std::vector<int> perm = {2, 0, 3, 1};
    Problem q = p;
    for (int j = 0; j < 4; ++j) {
      q.x.col(j) = p.x.col(perm[j]);
      q.names[j] = p.names[perm[j]];
    }
    const auto a = hsic_lasso(build_kernels(p.x, p.scores, p.names), 0.01, 1e-12);
    const auto b = hsic_lasso(build_kernels(q.x, q.scores, q.names), 0.01, 1e-12);
    for (int j = 0; j < 4; ++j) CHECK_THAT(b.beta[j], WithinAbs(a.beta[perm[j]], 1e-8));
  }
  SECTION("constant features always get zero") {
    auto p = random_problem(10, 3, rng);
    p.x.col(0).setConstant(1.0);
    const auto r = hsic_lasso(build_kernels(p.x, p.scores, p.names), 0.0);
    CHECK(r.beta[0] == 0.0);
  }
  SECTION("iteration cap reports non-convergence") {
    auto p = random_problem(10, 5, rng);
    const auto r = hsic_lasso(build_kernels(p.x, p.scores, p.names), 0.0, 1e-300, 2);
    CHECK_FALSE(r.converged);
    CHECK(r.sweeps == 2);
  }
}

TEST_CASE("node explanations") {
  std::mt19937_64 rng(4);
  SECTION("scores driven by degree single out degree") {
    std::vector<double> scores;
    const auto g = dependence_graph(rng, scores);
    const auto w = explain_node(g, scores, 0);
    CHECK(w.k_used == 1);
    CHECK(w.n_neighbors == 30);
    const double degree = *w.get("degree");
    CHECK(degree > 0.0);
    for (const auto& [name, value] : w.weights) {
      CHECK(value >= 0.0);
      if (name != "degree") CHECK(degree >= 10.0 * value);
    }
    CHECK(w.top(1).front().first == "degree");
  }
  SECTION("radius widens until five nodes are covered") {
    // From the end of an 8-node path even k=3 reaches only 4 nodes; from node 3, k=2 reaches 5.
    const auto path = make_graph(8, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 5}, {5, 6}, {6, 7}}, {}, {"f0"});
    const std::vector<double> scores(8, 0.5);
    const auto from_end = explain_node(path, scores, 0);
    CHECK(from_end.k_used == 3);
    CHECK(from_end.n_neighbors == 4);
    CHECK(from_end.all_zero());
    CHECK_FALSE(from_end.converged);
    const auto from_middle = explain_node(path, scores, 3);
    CHECK(from_middle.k_used == 2);
    CHECK(from_middle.n_neighbors == 5);
  }
  SECTION("isolated node gives a degenerate explanation") {
    const auto g = make_graph(6, {{1, 2}, {2, 3}}, {}, {"a", "b"});
    const auto w = explain_node(g, std::vector<double>(6, 0.1), 0);
    CHECK(w.all_zero());
    CHECK_FALSE(w.converged);
    CHECK(w.k_used == 3);
    CHECK(w.reason.find("insufficient-neighborhood") != std::string::npos);
    CHECK(w.weights.size() == 2);
  }
  SECTION("unknown node") {
    const auto g = make_graph(3, {});
    CHECK_THROWS_AS(explain_node(g, std::vector<double>(3, 0.0), 7), TriageError);
  }
}

TEST_CASE("weight formatting and persistence") {
  CHECK(format_weight(0.9941) == "9.941e-01");
  CHECK(format_weight(0.0) == "0.000e+00");
  CHECK(format_weight(0.034421) == "3.442e-02");

  ExplanationWeights w;
  w.node_id = "1EQPoYt9DAnpTrAYjTBRCSD5bj5e1an4tF";
  w.weights = {{"btc_sent_total", 0.0}, {"degree", 0.9941}, {"btc_received_median", 0.49705}};
  w.k_used = 1;
  w.n_neighbors = 6;
  w.rho = 0.01;
  w.converged = true;
  const auto doc = to_json(w);
  CHECK(doc["weights"]["degree"] == "9.941e-01");
  CHECK(doc["weights"]["btc_sent_total"] == "0.000e+00");
  CHECK(doc["weights_max_normalized"]["btc_received_median"] == "5.000e-01");
  for (const char* key : {"node_id", "k_used", "n_neighbors", "rho", "converged", "weights"}) CHECK(doc.contains(key));
  const auto back = explanation_from_json(doc);
  CHECK(back.weights == w.weights);
  CHECK(back.node_id == w.node_id);
  CHECK(back.converged);
}
