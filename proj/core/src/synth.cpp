#include "pairflow/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "pairflow/error.hpp"
#include "random.hpp"

namespace pairflow {

namespace {

constexpr double kParetoShape = 1.5;

Index target_edges(const SynthConfig& c) {
  return static_cast<Index>(std::llround(c.density * static_cast<double>(pair_count(c.n))));
}

std::string ticker(Index i, Index n) {
  const int width = n <= 100 ? 2 : static_cast<int>(std::to_string(n - 1).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "COIN%0*zu", width, i);
  return buf;
}

PairGraph random_connected_mask(Index n, Index edges, std::mt19937_64& rng) {
  PairGraph g(n);
  std::vector<Index> perm(n);
  std::iota(perm.begin(), perm.end(), Index{0});
  for (Index i = n; i > 1; --i) std::swap(perm[i - 1], perm[detail::uniform_below(rng, i)]);
  for (Index k = 1; k < n; ++k) g.add_edge(perm[k], perm[detail::uniform_below(rng, k)]);

  std::vector<Index> rest;
  for (Index p = 0; p < pair_count(n); ++p) {
    const auto [i, j] = pair_at(n, p);
    if (!g.has_edge(i, j)) rest.push_back(p);
  }
  const Index extra = edges - (n - 1);
  for (Index k = 0; k < extra; ++k) {
    std::swap(rest[k], rest[k + detail::uniform_below(rng, rest.size() - k)]);
    const auto [i, j] = pair_at(n, rest[k]);
    g.add_edge(i, j);
  }
  return g;
}

// w2 orthogonal to w1 with max |w2| = 0.5 min w1, so that every off-diagonal
// w2_i w2_j stays below a quarter of the smallest w1_i w1_j.
void shape_w2(const Eigen::VectorXd& w1, Eigen::VectorXd& w2) {
  w2 -= (w1.dot(w2) / w1.squaredNorm()) * w1;
  const double peak = w2.cwiseAbs().maxCoeff();
  if (peak > 0.0) w2 *= 0.5 * w1.minCoeff() / peak;
}

}  // namespace

void SynthConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw InfeasibleConfig("synth: " + what);
  };
  require(n >= 2, "n must be >= 2");
  require(density > 0.0 && density <= 1.0, "density must lie in (0, 1]");
  require(std::isfinite(noise) && noise >= 0.0, "noise must be >= 0");
  require(windows >= 1, "windows must be >= 1");
  require(std::isfinite(drift) && drift >= 0.0, "drift must be >= 0");
  require(volume_unit > 0.0 && std::isfinite(volume_unit), "volume_unit must be > 0");
  require(is_period(start_period), "start period must be YYYY-MM");
  require(target_edges(*this) >= n - 1,
          "density " + std::to_string(density) + " gives " + std::to_string(target_edges(*this)) +
              " pairs, fewer than the " + std::to_string(n - 1) + " needed for a connected mask");
}

SynthData synthesize(const SynthConfig& c) {
  c.validate();
  std::mt19937_64 rng(c.seed);
  const auto n = static_cast<Eigen::Index>(c.n);

  Eigen::VectorXd w1(n), w2(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    w1(i) = std::pow(1.0 - detail::uniform01(rng), -1.0 / kParetoShape);
  }
  for (Eigen::Index i = 0; i < n; ++i) w2(i) = detail::uniform_pm1(rng);
  shape_w2(w1, w2);

  SynthData data;
  std::vector<std::string> tickers;
  for (Index i = 0; i < c.n; ++i) tickers.push_back(ticker(i, c.n));
  data.symbols = SymbolTable(std::move(tickers));
  data.mask = random_connected_mask(c.n, target_edges(c), rng);

  std::string period = c.start_period;
  const double root = std::sqrt(c.volume_unit);
  for (int t = 0; t < c.windows; ++t) {
    Eigen::VectorXd a = w1, b = w2;
    if (c.drift > 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) a(i) *= std::exp(c.drift * detail::standard_normal(rng));
      shape_w2(a, b);
    }
    FactorPair f(a * root, b * root);
    const Eigen::MatrixXd k = reconstruct_k(f);
    Eigen::MatrixXd v = Eigen::MatrixXd::Zero(n, n);
    for (Index i = 0; i < c.n; ++i) {
      for (Index j = i + 1; j < c.n; ++j) {
        if (!data.mask.has_edge(i, j)) continue;
        const auto a_i = static_cast<Eigen::Index>(i), b_j = static_cast<Eigen::Index>(j);
        double x = k(a_i, b_j);
        if (c.noise > 0.0) x *= 1.0 + c.noise * detail::standard_normal(rng);
        v(a_i, b_j) = v(b_j, a_i) = std::max(0.0, x);
      }
    }
    data.windows.push_back({period, std::move(f), VolumeMatrix(std::move(v))});
    period = next_period(period);
  }
  return data;
}

std::vector<VolumeRecord> to_records(const SynthData& data) {
  std::vector<VolumeRecord> out;
  for (const auto& w : data.windows) {
    for (Index i = 0; i < w.v.n(); ++i) {
      for (Index j = i + 1; j < w.v.n(); ++j) {
        if (w.v(i, j) > 0.0) out.push_back({data.symbols[i], data.symbols[j], w.v(i, j), w.period});
      }
    }
  }
  return out;
}

}  // namespace pairflow
