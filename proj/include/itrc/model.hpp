#pragma once

#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "itrc/mat.hpp"

namespace itrc {

enum class OutputVariant : std::uint8_t { independent = 0, conditional = 1 };

struct ModelConfig {
  std::size_t d = 64;   // feature width
  std::size_t L = 6;    // encoding layers
  std::size_t T = 2;    // triage attach point, 1 <= T < L
  std::size_t l_max = 8;  // max answer length in tokens
  std::size_t K = 5;      // pruning candidate count
  double t = std::numeric_limits<double>::infinity();  // early-exit threshold
  OutputVariant variant = OutputVariant::independent;
  bool weight_sharing = false;
  bool shared_norm = false;
  std::uint64_t seed = 0;

  void validate() const {
    if (d == 0) throw std::invalid_argument("config: d must be >= 1");
    if (T < 1 || T >= L) throw std::invalid_argument("config: need 1 <= T < L");
    if (l_max < 1) throw std::invalid_argument("config: l_max must be >= 1");
    if (K < 1) throw std::invalid_argument("config: K must be >= 1");
  }
};

// One gated recurrent direction: forget gate, reset gate, input projection.
struct RecurrentDir {
  Mat Wf, Wr, W;  // each d x d, output-row major
  VecD bf, br;    // each d
};

struct RecurrentLayer {
  RecurrentDir fwd, bwd;
  Mat proj;  // d x 2d: projects [h_fwd ; h_bwd] back to width d
};

// Output-layer parameters; only the tensors of the configured variant are
// allocated.
struct HeadParams {
  // independent
  VecD ws, we;  // d each
  // conditional
  VecD wq;        // d
  Mat W1, W2;     // d x d
  Mat Wu;         // d x 2d
};

struct Parameters {
  std::size_t d = 0;
  std::size_t vocab_size = 0;
  Mat embedding;  // vocab_size x d
  std::vector<RecurrentLayer> q_layers, c_layers;  // L each
  Mat attn_proj;  // d x 2d
  HeadParams model_head;
  HeadParams tri_head;  // unused (empty) when weight_sharing

  // Zero-filled structure with the same shapes; gradients use this.
  Parameters zeros_like() const;
  // In-place p += alpha * g over every tensor (shapes must match).
  void axpy_inplace(double alpha, const Parameters& g);
  bool all_finite() const;
};

// Uniform init in [-1/sqrt(d), +1/sqrt(d)] from mt19937_64(config.seed);
// biases zero. Same seed gives bitwise-identical parameters.
Parameters init_params(const ModelConfig& config, std::size_t vocab_size);

// 64-bit polynomial string hash: h <- h * 131 + byte (mod 2^64), h0 = 0.
std::uint64_t token_hash(const std::string& norm);

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Binary checkpoint, magic "ITRC1", little-endian, config header, named
// f64 tensors row-major. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const Parameters& params);
std::pair<ModelConfig, Parameters> load_checkpoint(const std::string& path);

}  // namespace itrc
