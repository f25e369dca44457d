#include <cmath>
#include <cstdio>
#include <fstream>

#include "doctest.h"
#include "itrc/model.hpp"

using namespace itrc;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.d = 4;
  c.L = 2;
  c.T = 1;
  c.seed = 42;
  return c;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("token hash matches hand-computed polynomial values") {
  // h = h*131 + byte over the bytes of the norm
  CHECK(token_hash("the") == 2004401u);
  CHECK(token_hash("cat") == 1711762u);
  CHECK(token_hash("the") % 4096 == 1457u);
  CHECK(token_hash("cat") % 4096 == 3730u);
}

TEST_CASE("init is deterministic and bounded") {
  const ModelConfig c = small_config();
  const Parameters a = init_params(c, 32);
  const Parameters b = init_params(c, 32);
  CHECK(a.embedding.v == b.embedding.v);
  CHECK(a.q_layers[0].fwd.Wf.v == b.q_layers[0].fwd.Wf.v);
  CHECK(a.model_head.ws == b.model_head.ws);

  const double bound = 1.0 / std::sqrt(4.0) + 1e-15;
  for (double x : a.embedding.v) CHECK(std::abs(x) <= bound);
  for (double x : a.attn_proj.v) CHECK(std::abs(x) <= bound);
  for (double x : a.q_layers[1].bwd.bf) CHECK(x == 0.0);

  ModelConfig c2 = c;
  c2.seed = 43;
  const Parameters other = init_params(c2, 32);
  CHECK(a.embedding.v != other.embedding.v);
}

TEST_CASE("checkpoint round trip is bit exact") {
  ModelConfig c = small_config();
  c.variant = OutputVariant::conditional;
  c.t = std::numeric_limits<double>::infinity();
  const Parameters p = init_params(c, 17);

  const std::string path = "test_ckpt_roundtrip.itrc";
  save_checkpoint(path, c, p);
  auto [c2, p2] = load_checkpoint(path);

  CHECK(c2.d == c.d);
  CHECK(c2.L == c.L);
  CHECK(c2.T == c.T);
  CHECK(c2.t == c.t);
  CHECK(c2.variant == c.variant);
  CHECK(c2.weight_sharing == c.weight_sharing);
  CHECK(p2.vocab_size == 17);
  CHECK(p2.embedding.v == p.embedding.v);
  CHECK(p2.model_head.W1.v == p.model_head.W1.v);
  CHECK(p2.tri_head.Wu.v == p.tri_head.Wu.v);

  // saving the loaded parameters reproduces the same bytes
  const std::string path2 = "test_ckpt_roundtrip2.itrc";
  save_checkpoint(path2, c2, p2);
  CHECK(slurp(path) == slurp(path2));
  std::remove(path.c_str());
  std::remove(path2.c_str());
}

TEST_CASE("weight sharing drops the triage head tensors") {
  ModelConfig c = small_config();
  c.weight_sharing = true;
  const Parameters p = init_params(c, 8);
  CHECK(p.tri_head.ws.empty());
  CHECK_FALSE(p.model_head.ws.empty());

  const std::string path = "test_ckpt_ws.itrc";
  save_checkpoint(path, c, p);
  auto [c2, p2] = load_checkpoint(path);
  CHECK(c2.weight_sharing);
  CHECK(p2.tri_head.ws.empty());
  CHECK(p2.model_head.ws == p.model_head.ws);
  std::remove(path.c_str());
}

TEST_CASE("corrupt checkpoints are rejected") {
  CHECK_THROWS_AS(load_checkpoint("does_not_exist.itrc"), CheckpointError);

  const std::string path = "test_ckpt_bad.itrc";
  {
    std::ofstream f(path, std::ios::binary);
    f << "NOTITRC_WHATEVER";
  }
  CHECK_THROWS_AS(load_checkpoint(path), CheckpointError);
  std::remove(path.c_str());
}

TEST_CASE("gradient axpy and zeros_like keep structure congruent") {
  const ModelConfig c = small_config();
  Parameters p = init_params(c, 8);
  const Parameters g = init_params([] {
    ModelConfig c2;
    c2.d = 4;
    c2.L = 2;
    c2.T = 1;
    c2.seed = 99;
    return c2;
  }(), 8);
  Parameters z = p.zeros_like();
  for (double x : z.embedding.v) CHECK(x == 0.0);

  const double before = p.embedding.v[0];
  p.axpy_inplace(0.5, g);
  CHECK(p.embedding.v[0] == doctest::Approx(before + 0.5 * g.embedding.v[0]));
  CHECK(p.all_finite());
}
