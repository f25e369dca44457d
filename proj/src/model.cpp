#include "itrc/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

namespace itrc {

namespace {

struct NamedTensor {
  std::string name;
  VecD* data;
  std::vector<std::uint64_t> dims;
  bool is_bias;
};

void add_mat(std::vector<NamedTensor>& out, const std::string& name, Mat& m) {
  if (m.v.empty()) return;
  out.push_back({name, &m.v, {m.rows, m.cols}, false});
}

void add_vec(std::vector<NamedTensor>& out, const std::string& name, VecD& v,
             bool is_bias) {
  if (v.empty()) return;
  out.push_back({name, &v, {v.size()}, is_bias});
}

void add_head(std::vector<NamedTensor>& out, const std::string& prefix, HeadParams& h) {
  add_vec(out, prefix + ".ws", h.ws, false);
  add_vec(out, prefix + ".we", h.we, false);
  add_vec(out, prefix + ".wq", h.wq, false);
  add_mat(out, prefix + ".W1", h.W1);
  add_mat(out, prefix + ".Wu", h.Wu);
  add_mat(out, prefix + ".W2", h.W2);
}

// Canonical tensor order; also the parameter-draw order at init.
std::vector<NamedTensor> named_tensors(Parameters& p) {
  std::vector<NamedTensor> out;
  add_mat(out, "embedding", p.embedding);
  const char* streams[2] = {"q", "c"};
  std::vector<RecurrentLayer>* layer_sets[2] = {&p.q_layers, &p.c_layers};
  for (int s = 0; s < 2; ++s) {
    for (std::size_t i = 0; i < layer_sets[s]->size(); ++i) {
      RecurrentLayer& layer = (*layer_sets[s])[i];
      const std::string base = std::string("enc.") + streams[s] + "." + std::to_string(i);
      RecurrentDir* dirs[2] = {&layer.fwd, &layer.bwd};
      const char* dir_names[2] = {"fwd", "bwd"};
      for (int dd = 0; dd < 2; ++dd) {
        const std::string db = base + "." + dir_names[dd];
        add_mat(out, db + ".Wf", dirs[dd]->Wf);
        add_vec(out, db + ".bf", dirs[dd]->bf, true);
        add_mat(out, db + ".Wr", dirs[dd]->Wr);
        add_vec(out, db + ".br", dirs[dd]->br, true);
        add_mat(out, db + ".W", dirs[dd]->W);
      }
      add_mat(out, base + ".proj", layer.proj);
    }
  }
  add_mat(out, "attn.proj", p.attn_proj);
  add_head(out, "head.model", p.model_head);
  add_head(out, "head.tri", p.tri_head);
  return out;
}

Parameters alloc_params(const ModelConfig& config, std::size_t vocab_size) {
  config.validate();
  if (vocab_size == 0) throw std::invalid_argument("init_params: vocab_size must be >= 1");
  const std::size_t d = config.d;

  Parameters p;
  p.d = d;
  p.vocab_size = vocab_size;
  p.embedding = Mat(vocab_size, d);

  auto make_layer = [d] {
    RecurrentLayer layer;
    for (RecurrentDir* dir : {&layer.fwd, &layer.bwd}) {
      dir->Wf = Mat(d, d);
      dir->Wr = Mat(d, d);
      dir->W = Mat(d, d);
      dir->bf.assign(d, 0.0);
      dir->br.assign(d, 0.0);
    }
    layer.proj = Mat(d, 2 * d);
    return layer;
  };
  for (std::size_t i = 0; i < config.L; ++i) {
    p.q_layers.push_back(make_layer());
    p.c_layers.push_back(make_layer());
  }
  p.attn_proj = Mat(d, 2 * d);

  auto make_head = [&](HeadParams& h) {
    if (config.variant == OutputVariant::independent) {
      h.ws.assign(d, 0.0);
      h.we.assign(d, 0.0);
    } else {
      h.wq.assign(d, 0.0);
      h.W1 = Mat(d, d);
      h.Wu = Mat(d, 2 * d);
      h.W2 = Mat(d, d);
    }
  };
  make_head(p.model_head);
  if (!config.weight_sharing) make_head(p.tri_head);
  return p;
}

template <class P, class F>
void for_each_vec(P& p, F&& f) {
  f(p.embedding.v);
  for (auto* layers : {&p.q_layers, &p.c_layers}) {
    for (auto& layer : *layers) {
      for (auto* dir : {&layer.fwd, &layer.bwd}) {
        f(dir->Wf.v);
        f(dir->bf);
        f(dir->Wr.v);
        f(dir->br);
        f(dir->W.v);
      }
      f(layer.proj.v);
    }
  }
  f(p.attn_proj.v);
  for (auto* h : {&p.model_head, &p.tri_head}) {
    f(h->ws);
    f(h->we);
    f(h->wq);
    f(h->W1.v);
    f(h->Wu.v);
    f(h->W2.v);
  }
}

}  // namespace

Parameters Parameters::zeros_like() const {
  Parameters z = *this;
  for_each_vec(z, [](VecD& v) { std::fill(v.begin(), v.end(), 0.0); });
  return z;
}

void Parameters::axpy_inplace(double alpha, const Parameters& g) {
  std::vector<VecD*> mine;
  std::vector<const VecD*> theirs;
  for_each_vec(*this, [&](VecD& v) { mine.push_back(&v); });
  for_each_vec(g, [&](const VecD& v) { theirs.push_back(&v); });
  if (mine.size() != theirs.size()) throw std::invalid_argument("parameter structure mismatch");
  for (std::size_t i = 0; i < mine.size(); ++i) {
    if (mine[i]->size() != theirs[i]->size())
      throw std::invalid_argument("parameter shape mismatch");
    for (std::size_t j = 0; j < mine[i]->size(); ++j) (*mine[i])[j] += alpha * (*theirs[i])[j];
  }
}

bool Parameters::all_finite() const {
  bool ok = true;
  for_each_vec(*this, [&](const VecD& v) {
    for (double x : v)
      if (!std::isfinite(x)) ok = false;
  });
  return ok;
}

Parameters init_params(const ModelConfig& config, std::size_t vocab_size) {
  Parameters p = alloc_params(config, vocab_size);
  std::mt19937_64 gen(config.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(config.d));
  for (NamedTensor& t : named_tensors(p)) {
    if (t.is_bias) continue;
    for (double& x : *t.data) x = (2.0 * uniform01(gen) - 1.0) * bound;
  }
  return p;
}

std::uint64_t token_hash(const std::string& norm) {
  std::uint64_t h = 0;
  for (unsigned char c : norm) h = h * 131u + c;
  return h;
}

namespace {

constexpr char kMagic[5] = {'I', 'T', 'R', 'C', '1'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u16(std::string& out, std::uint16_t x) {
  out.push_back(static_cast<char>(x & 0xff));
  out.push_back(static_cast<char>((x >> 8) & 0xff));
}
void put_u32(std::string& out, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t x) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((x >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double x) { put_u64(out, std::bit_cast<std::uint64_t>(x)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  explicit Reader(const std::string& b) : buf(b) {}
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw CheckpointError("checkpoint truncated");
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t x = static_cast<std::uint8_t>(buf[pos]) |
                      (static_cast<std::uint16_t>(static_cast<std::uint8_t>(buf[pos + 1])) << 8);
    pos += 2;
    return x;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i)
      x |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 4;
    return x;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i)
      x |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf[pos + i])) << (8 * i);
    pos += 8;
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(buf[pos++]);
  }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const Parameters& params) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kFormatVersion);
  put_u64(out, config.d);
  put_u64(out, config.L);
  put_u64(out, config.T);
  put_u64(out, config.l_max);
  put_u64(out, config.K);
  put_f64(out, config.t);
  out.push_back(static_cast<char>(config.variant));
  out.push_back(config.weight_sharing ? 1 : 0);
  out.push_back(config.shared_norm ? 1 : 0);
  out.push_back(0);  // pad
  put_u64(out, config.seed);
  put_u64(out, params.vocab_size);

  auto tensors = named_tensors(const_cast<Parameters&>(params));
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    put_u16(out, static_cast<std::uint16_t>(t.name.size()));
    out.append(t.name);
    out.push_back(static_cast<char>(t.dims.size()));
    for (std::uint64_t d : t.dims) put_u64(out, d);
  }
  for (const NamedTensor& t : tensors)
    for (double x : *t.data) put_f64(out, x);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw CheckpointError("write failed for checkpoint: " + path);
}

std::pair<ModelConfig, Parameters> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  Reader r(buf);
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw CheckpointError(path + ": bad magic (not an ITRC1 checkpoint)");
  if (r.u32() != kFormatVersion) throw CheckpointError(path + ": unsupported format version");

  ModelConfig config;
  config.d = r.u64();
  config.L = r.u64();
  config.T = r.u64();
  config.l_max = r.u64();
  config.K = r.u64();
  config.t = r.f64();
  const std::uint8_t variant = r.u8();
  if (variant > 1) throw CheckpointError(path + ": unknown output variant");
  config.variant = static_cast<OutputVariant>(variant);
  config.weight_sharing = r.u8() != 0;
  config.shared_norm = r.u8() != 0;
  r.u8();  // pad
  config.seed = r.u64();
  const std::uint64_t vocab_size = r.u64();
  config.validate();

  Parameters params = alloc_params(config, vocab_size);
  auto expected = named_tensors(params);

  const std::uint32_t count = r.u32();
  if (count != expected.size())
    throw CheckpointError(path + ": tensor count mismatch");

  for (NamedTensor& t : expected) {
    const std::string name = r.bytes(r.u16());
    if (name != t.name)
      throw CheckpointError(path + ": unexpected tensor \"" + name + "\" (want \"" + t.name + "\")");
    const std::uint8_t rank = r.u8();
    if (rank != t.dims.size()) throw CheckpointError(path + ": rank mismatch for " + name);
    for (std::uint64_t want : t.dims)
      if (r.u64() != want) throw CheckpointError(path + ": shape mismatch for " + name);
  }
  for (NamedTensor& t : expected)
    for (double& x : *t.data) x = r.f64();
  if (r.pos != buf.size()) throw CheckpointError(path + ": trailing bytes");

  return {config, std::move(params)};
}

}  // namespace itrc
