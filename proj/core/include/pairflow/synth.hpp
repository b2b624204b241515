#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairflow/ingest.hpp"
#include "pairflow/matcore.hpp"

namespace pairflow {

// Ground-truth generator: heavy-tailed w1 >= 0, w2 orthogonal to w1 and small
// enough that K° = w1 w1^T - w2 w2^T is positive off the diagonal, and
// V = max(0, K° + noise) restricted to a random connected mask.
struct SynthConfig {
  Index n = 10;
  double density = 0.6;  // target fraction of the N(N-1)/2 pairs kept in the mask
  double noise = 0.0;    // relative std of the multiplicative volume noise
  int windows = 1;
  double drift = 0.0;    // per-window log-scale std applied to w1
  double volume_unit = 1e6;
  std::string start_period = "2022-01";
  std::uint64_t seed = 0;

  /// Throws InfeasibleConfig, including when round(density * P) < N - 1.
  void validate() const;
};

struct SynthWindow {
  std::string period;
  FactorPair truth;  // factors in volume units: V = K*(truth) on the mask when noise = 0
  VolumeMatrix v;
};

struct SynthData {
  SymbolTable symbols;  // COIN00, COIN01, ...
  PairGraph mask;       // shared by every window
  std::vector<SynthWindow> windows;
};

SynthData synthesize(const SynthConfig& config);

/// One record per positive cell, base = lower index.
std::vector<VolumeRecord> to_records(const SynthData& data);

}  // namespace pairflow
