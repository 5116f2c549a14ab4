#include "pyrotime/cwgan.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "pyrotime/errors.hpp"
#include "pyrotime/farr.hpp"
#include "pyrotime/rng.hpp"

namespace pyrotime::cwgan {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;
using nn::Param;
using nn::ParamSet;
using nn::Shape;
using nn::Tape;
using nn::Tensor;

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

int ipow(int b, int e) {
  int r = 1;
  while (e-- > 0) r *= b;
  return r;
}

Param& conv_weight(ParamSet& ps, const std::string& name, int cin, int cout, int k, Rng& rng) {
  const std::size_t fan_in = static_cast<std::size_t>(cin) * k * k;
  return ps.add_normal(name + ".w", fan_in * cout, std::sqrt(2.0 / fan_in), rng);
}

/// Marks a parameter set frozen for the lifetime of the guard.
class FreezeGuard {
 public:
  FreezeGuard(ParamSet& ps, bool frozen) : ps_(ps), before_(ps.frozen()) { ps_.set_frozen(frozen); }
  ~FreezeGuard() { ps_.set_frozen(before_); }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  ParamSet& ps_;
  bool before_;
};

Tensor concat_batch(const Tensor& a, const Tensor& b) {
  Tensor out({a.shape.n + b.shape.n, a.shape.c, a.shape.h, a.shape.w});
  std::copy(a.data.begin(), a.data.end(), out.data.begin());
  std::copy(b.data.begin(), b.data.end(), out.data.begin() + a.size());
  return out;
}

void check_field_batch(const Tensor& t, int size, const char* what) {
  if (t.shape.c != 1 || t.shape.h != size || t.shape.w != size || t.shape.n < 1) {
    throw std::invalid_argument(std::string(what) + ": expected [n,1," + std::to_string(size) + "," +
                                std::to_string(size) + "], got " + nn::to_string(t.shape));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configs

void GeneratorConfig::validate() const {
  require(latent_dim >= 1, "GeneratorConfig: latent_dim must be >= 1");
  require(levels >= 1, "GeneratorConfig: levels must be >= 1");
  require(dense_k >= 1 && dense_n >= 1, "GeneratorConfig: dense_k and dense_n must be >= 1");
  require(down_p == 2, "GeneratorConfig: only down_p = 2 is supported");
  require(down_q >= 1, "GeneratorConfig: down_q must be >= 1");
  require(base_width >= 1, "GeneratorConfig: base_width must be >= 1");
  require(input_size >= 1 && input_size % ipow(down_p, levels) == 0,
          "GeneratorConfig: input_size must be divisible by p^levels");
}

int GeneratorConfig::width(int level) const { return base_width * ipow(down_q, level); }

void CriticConfig::validate() const {
  require(levels >= 1, "CriticConfig: levels must be >= 1");
  require(dense_k >= 1 && dense_n >= 1, "CriticConfig: dense_k and dense_n must be >= 1");
  require(down_q >= 1 && base_width >= 1, "CriticConfig: widths must be >= 1");
  require(!fc_widths.empty() && fc_widths.back() == 1,
          "CriticConfig: fc_widths must end in a single output");
  for (int w : fc_widths) require(w >= 1, "CriticConfig: fc widths must be >= 1");
  require(input_size >= 1 && input_size % ipow(2, levels) == 0,
          "CriticConfig: input_size must be divisible by 2^levels");
}

int CriticConfig::width(int level) const { return base_width * ipow(down_q, level); }

void TrainConfig::validate() const {
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
  require(critic_steps_per_gen_step >= 1, "TrainConfig: critic_steps_per_gen_step must be >= 1");
  require(learning_rate > 0.0, "TrainConfig: learning_rate must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
          "TrainConfig: Adam betas must be in [0, 1)");
  require(gp_weight >= 0.0, "TrainConfig: gp_weight must be >= 0");
  require(checkpoint_every >= 0, "TrainConfig: checkpoint_every must be >= 0");
}

// ---------------------------------------------------------------------------
// Generator

Generator::Generator(const GeneratorConfig& config, std::uint64_t init_seed) : cfg_(config) {
  cfg_.validate();
  Rng rng(init_seed);
  const int L = cfg_.levels;
  stem_w_ = &conv_weight(params_, "g.stem", 1, cfg_.width(0), 3, rng);
  stem_b_ = &params_.add("g.stem.b", cfg_.width(0));
  for (int l = 0; l < L; ++l) {
    const std::string n = "g.down" + std::to_string(l);
    down_blocks_.push_back(make_block(n + ".db", cfg_.width(l), cfg_.width(l), rng));
    down_w_.push_back(&conv_weight(params_, n + ".proj", cfg_.width(l), cfg_.width(l + 1), 1, rng));
    down_b_.push_back(&params_.add(n + ".proj.b", cfg_.width(l + 1)));
  }
  bottleneck_ = make_block("g.mid", cfg_.width(L), cfg_.width(L), rng);
  up_w_.resize(L);
  up_b_.resize(L);
  up_blocks_.resize(L);
  for (int l = L - 1; l >= 0; --l) {
    const std::string n = "g.up" + std::to_string(l);
    up_w_[l] = &conv_weight(params_, n + ".proj", cfg_.width(l + 1), cfg_.width(l), 1, rng);
    up_b_[l] = &params_.add(n + ".proj.b", cfg_.width(l));
    up_blocks_[l] = make_block(n + ".db", 2 * cfg_.width(l), cfg_.width(l), rng);
  }
  head_w_ = &conv_weight(params_, "g.head", cfg_.width(0), 1, 3, rng);
  head_b_ = &params_.add("g.head.b", 1);
}

Generator::DenseBlock Generator::make_block(const std::string& name, int cin, int cout, Rng& rng) {
  DenseBlock b;
  b.cin = cin;
  b.cout = cout;
  const double zstd = 0.2 / std::sqrt(static_cast<double>(cfg_.latent_dim));
  int channels = cin;
  for (int s = 0; s < cfg_.dense_n; ++s) {
    const std::string n = name + "." + std::to_string(s);
    const std::size_t cz = static_cast<std::size_t>(channels) * cfg_.latent_dim;
    b.cin_wg.push_back(&params_.add_normal(n + ".cin.wg", cz, zstd, rng));
    b.cin_bg.push_back(&params_.add_constant(n + ".cin.bg", channels, 1.0));
    b.cin_wb.push_back(&params_.add_normal(n + ".cin.wb", cz, zstd, rng));
    b.cin_bb.push_back(&params_.add(n + ".cin.bb", channels));
    const int out = s + 1 == cfg_.dense_n ? cout : cfg_.dense_k;
    b.conv_w.push_back(&conv_weight(params_, n + ".conv", channels, out, 3, rng));
    b.conv_b.push_back(&params_.add(n + ".conv.b", out));
    channels += cfg_.dense_k;
  }
  return b;
}

Tape::Var Generator::run_block(Tape& tape, DenseBlock& block, Tape::Var x, const Tensor& z) {
  std::vector<Tape::Var> features = {x};
  for (int s = 0; s < cfg_.dense_n; ++s) {
    Tape::Var in = features.size() == 1 ? features[0] : tape.concat(features);
    Tape::Var h = tape.cin(in, z, *block.cin_wg[s], *block.cin_bg[s], *block.cin_wb[s],
                           *block.cin_bb[s], params_);
    h = tape.elu(h);
    const int out = s + 1 == cfg_.dense_n ? block.cout : cfg_.dense_k;
    h = tape.conv(h, *block.conv_w[s], *block.conv_b[s], out, 3, params_);
    if (s + 1 == cfg_.dense_n) return h;
    features.push_back(h);
  }
  return x;
}

Tape::Var Generator::forward(Tape& tape, const Tensor& z, Tape::Var measurement) {
  const Tensor& m = tape.value(measurement);
  check_field_batch(m, cfg_.input_size, "generator measurement");
  if (z.shape.n != m.shape.n || z.shape.c != cfg_.latent_dim || z.shape.plane() != 1) {
    throw std::invalid_argument("generator latent batch must be [n," +
                                std::to_string(cfg_.latent_dim) + ",1,1], got " +
                                nn::to_string(z.shape));
  }
  const int L = cfg_.levels;
  Tape::Var x = tape.conv(measurement, *stem_w_, *stem_b_, cfg_.width(0), 3, params_);
  std::vector<Tape::Var> skips;
  for (int l = 0; l < L; ++l) {
    Tape::Var h = run_block(tape, down_blocks_[l], x, z);
    skips.push_back(h);
    h = tape.conv(h, *down_w_[l], *down_b_[l], cfg_.width(l + 1), 1, params_);
    x = tape.avgpool2(h);
  }
  x = run_block(tape, bottleneck_, x, z);
  for (int l = L - 1; l >= 0; --l) {
    x = tape.upsample2(x);
    x = tape.conv(x, *up_w_[l], *up_b_[l], cfg_.width(l), 1, params_);
    x = tape.concat({x, skips[l]});
    x = run_block(tape, up_blocks_[l], x, z);
  }
  x = tape.elu(x);
  x = tape.conv(x, *head_w_, *head_b_, 1, 3, params_);
  return tape.sigmoid(x);
}

Tensor Generator::sample(const Tensor& z, const Tensor& measurement) {
  Tape tape(false);
  const Tape::Var m = tape.input(measurement);
  return tape.value(forward(tape, z, m));
}

// ---------------------------------------------------------------------------
// Critic

Critic::Critic(const CriticConfig& config, std::uint64_t init_seed) : cfg_(config) {
  cfg_.validate();
  Rng rng(init_seed);
  stem_w_ = &conv_weight(params_, "d.stem", 2, cfg_.width(0), 3, rng);
  stem_b_ = &params_.add("d.stem.b", cfg_.width(0));
  for (int l = 0; l < cfg_.levels; ++l) {
    const std::string n = "d.down" + std::to_string(l);
    DenseBlock b;
    b.cin = b.cout = cfg_.width(l);
    int channels = b.cin;
    for (int s = 0; s < cfg_.dense_n; ++s) {
      const int out = s + 1 == cfg_.dense_n ? b.cout : cfg_.dense_k;
      const std::string sn = n + ".db." + std::to_string(s);
      b.conv_w.push_back(&conv_weight(params_, sn + ".conv", channels, out, 3, rng));
      b.conv_b.push_back(&params_.add(sn + ".conv.b", out));
      channels += cfg_.dense_k;
    }
    blocks_.push_back(b);
    down_w_.push_back(&conv_weight(params_, n + ".proj", cfg_.width(l), cfg_.width(l + 1), 1, rng));
    down_b_.push_back(&params_.add(n + ".proj.b", cfg_.width(l + 1)));
  }
  const int side = cfg_.input_size >> cfg_.levels;
  int features = cfg_.width(cfg_.levels) * side * side;
  for (std::size_t k = 0; k < cfg_.fc_widths.size(); ++k) {
    const int out = cfg_.fc_widths[k];
    const std::string n = "d.fc" + std::to_string(k);
    fc_w_.push_back(&params_.add_normal(n + ".w", static_cast<std::size_t>(features) * out,
                                        std::sqrt(1.0 / features), rng));
    fc_b_.push_back(&params_.add(n + ".b", out));
    features = out;
  }
}

Tape::Var Critic::forward(Tape& tape, Tape::Var arrival, Tape::Var measurement) {
  check_field_batch(tape.value(arrival), cfg_.input_size, "critic arrival");
  check_field_batch(tape.value(measurement), cfg_.input_size, "critic measurement");
  if (tape.value(arrival).shape.n != tape.value(measurement).shape.n) {
    throw std::invalid_argument("critic: arrival and measurement batch sizes differ");
  }
  Tape::Var x = tape.concat({arrival, measurement});
  x = tape.conv(x, *stem_w_, *stem_b_, cfg_.width(0), 3, params_);
  for (int l = 0; l < cfg_.levels; ++l) {
    DenseBlock& b = blocks_[l];
    std::vector<Tape::Var> features = {x};
    for (int s = 0; s < cfg_.dense_n; ++s) {
      Tape::Var in = features.size() == 1 ? features[0] : tape.concat(features);
      const int out = s + 1 == cfg_.dense_n ? b.cout : cfg_.dense_k;
      Tape::Var h = tape.conv(tape.elu(in), *b.conv_w[s], *b.conv_b[s], out, 3, params_);
      if (s + 1 == cfg_.dense_n) {
        x = h;
      } else {
        features.push_back(h);
      }
    }
    x = tape.conv(x, *down_w_[l], *down_b_[l], cfg_.width(l + 1), 1, params_);
    x = tape.avgpool2(x);
  }
  x = tape.elu(x);
  for (std::size_t k = 0; k < fc_w_.size(); ++k) {
    x = tape.linear(x, *fc_w_[k], *fc_b_[k], cfg_.fc_widths[k], params_);
    if (k + 1 < fc_w_.size()) x = tape.elu(x);
  }
  return x;
}

std::vector<double> Critic::score(const Tensor& arrival, const Tensor& measurement) {
  Tape tape(false);
  const auto a = tape.input(arrival);
  const auto m = tape.input(measurement);
  return tape.value(forward(tape, a, m)).data;
}

Tensor Critic::input_gradient(const Tensor& arrival, const Tensor& measurement) {
  FreezeGuard freeze(params_, true);
  Tape tape(true);
  const auto a = tape.input(arrival, true);
  const auto m = tape.input(measurement);
  const auto y = forward(tape, a, m);
  const Tensor seed(tape.value(y).shape, 1.0);
  tape.backward(y, &seed);
  const Tensor& g = tape.grad(a);
  return g.empty() ? Tensor(arrival.shape) : g;
}

// ---------------------------------------------------------------------------
// Losses

double wasserstein_estimate(const std::vector<double>& real_scores,
                            const std::vector<double>& fake_scores) {
  require(!real_scores.empty() && !fake_scores.empty(), "wasserstein_estimate: empty batch");
  const double r = std::accumulate(real_scores.begin(), real_scores.end(), 0.0) / real_scores.size();
  const double f = std::accumulate(fake_scores.begin(), fake_scores.end(), 0.0) / fake_scores.size();
  return r - f;
}

WganLosses wgan_losses(Generator& gen, Critic& critic, const Tensor& real, const Tensor& measurement,
                       const Tensor& z, const std::vector<double>& eps, double gp_weight,
                       bool accumulate_critic_grads) {
  const int n = real.shape.n;
  require(n >= 1, "wgan_losses: empty batch");
  require(static_cast<int>(eps.size()) == n, "wgan_losses: one interpolation weight per sample");
  const Tensor fake = gen.sample(z, measurement);
  WganLosses out;

  std::vector<double> real_scores, fake_scores;
  {
    FreezeGuard freeze(critic.params(), !accumulate_critic_grads);
    Tape tape(accumulate_critic_grads);
    const auto a = tape.input(concat_batch(real, fake));
    const auto m = tape.input(concat_batch(measurement, measurement));
    const auto y = critic.forward(tape, a, m);
    const auto& scores = tape.value(y).data;
    real_scores.assign(scores.begin(), scores.begin() + n);
    fake_scores.assign(scores.begin() + n, scores.end());
    if (accumulate_critic_grads) {
      Tensor seed(tape.value(y).shape);
      for (int b = 0; b < n; ++b) {
        seed.data[b] = -1.0 / n;
        seed.data[n + b] = 1.0 / n;
      }
      tape.backward(y, &seed);
    }
  }
  out.wasserstein = wasserstein_estimate(real_scores, fake_scores);
  out.generator_loss = -std::accumulate(fake_scores.begin(), fake_scores.end(), 0.0) / n;

  Tensor mix(real.shape);
  const std::size_t per = real.shape.per_sample();
  for (int b = 0; b < n; ++b)
    for (std::size_t q = 0; q < per; ++q) {
      const std::size_t k = b * per + q;
      mix.data[k] = eps[b] * real.data[k] + (1.0 - eps[b]) * fake.data[k];
    }
  Tensor g = critic.input_gradient(mix, measurement);
  std::vector<double> norms(n);
  for (int b = 0; b < n; ++b) {
    double s2 = 0.0;
    for (std::size_t q = 0; q < per; ++q) s2 += g.sample(b)[q] * g.sample(b)[q];
    norms[b] = std::sqrt(s2);
    out.gp += (norms[b] - 1.0) * (norms[b] - 1.0) / n;
  }
  out.critic_loss = -out.wasserstein + gp_weight * out.gp;

  if (accumulate_critic_grads && gp_weight > 0.0) {
    // d/dtheta of (|g| - 1)^2 is 2 (|g| - 1) times the derivative of the
    // directional input derivative along u = g / |g|, held fixed.
    Tensor u(real.shape);
    Tensor seed({n, 1, 1, 1});
    for (int b = 0; b < n; ++b) {
      if (norms[b] > 0.0) {
        for (std::size_t q = 0; q < per; ++q) u.sample(b)[q] = g.sample(b)[q] / norms[b];
      }
      seed.data[b] = gp_weight * 2.0 * (norms[b] - 1.0) / n;
    }
    FreezeGuard freeze(critic.params(), false);
    Tape tape(true);
    const auto a = tape.input(mix, u, false);
    const auto m = tape.input(measurement);
    const auto y = critic.forward(tape, a, m);
    tape.backward(y, nullptr, &seed);
  }
  return out;
}

double gradient_check(Critic& critic, const Tensor& arrival, const Tensor& measurement, double step,
                      int n_pixels, std::uint64_t seed) {
  require(arrival.shape.n == 1, "gradient_check: probe batch must hold one sample");
  require(step > 0.0 && n_pixels >= 1, "gradient_check: step and pixel count must be positive");
  const Tensor g = critic.input_gradient(arrival, measurement);
  Rng rng(seed);
  double worst = 0.0;
  Tensor probe = arrival;
  for (int k = 0; k < n_pixels; ++k) {
    const std::size_t q = rng.below(arrival.size());
    const double keep = probe.data[q];
    probe.data[q] = keep + step;
    const double up = critic.score(probe, measurement)[0];
    probe.data[q] = keep - step;
    const double down = critic.score(probe, measurement)[0];
    probe.data[q] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double a = g.data[q];
    const double scale = std::max({std::abs(a), std::abs(fd), 1e-7});
    worst = std::max(worst, a == fd ? 0.0 : std::abs(a - fd) / scale);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

ordered_json gen_json(const GeneratorConfig& c) {
  return {{"latent_dim", c.latent_dim}, {"levels", c.levels},         {"dense_k", c.dense_k},
          {"dense_n", c.dense_n},       {"down_p", c.down_p},         {"down_q", c.down_q},
          {"base_width", c.base_width}, {"input_size", c.input_size}};
}

GeneratorConfig gen_from_json(const json& j) {
  GeneratorConfig c;
  c.latent_dim = j.at("latent_dim");
  c.levels = j.at("levels");
  c.dense_k = j.at("dense_k");
  c.dense_n = j.at("dense_n");
  c.down_p = j.at("down_p");
  c.down_q = j.at("down_q");
  c.base_width = j.at("base_width");
  c.input_size = j.at("input_size");
  return c;
}

ordered_json critic_json(const CriticConfig& c) {
  return {{"levels", c.levels},         {"dense_k", c.dense_k},       {"dense_n", c.dense_n},
          {"down_q", c.down_q},         {"base_width", c.base_width}, {"fc_widths", c.fc_widths},
          {"input_size", c.input_size}};
}

CriticConfig critic_from_json(const json& j) {
  CriticConfig c;
  c.levels = j.at("levels");
  c.dense_k = j.at("dense_k");
  c.dense_n = j.at("dense_n");
  c.down_q = j.at("down_q");
  c.base_width = j.at("base_width");
  c.fc_widths = j.at("fc_widths").get<std::vector<int>>();
  c.input_size = j.at("input_size");
  return c;
}

ordered_json train_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"critic_steps_per_gen_step", c.critic_steps_per_gen_step},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"gp_weight", c.gp_weight},
          {"seed", c.seed},
          {"checkpoint_every", c.checkpoint_every}};
}

TrainConfig train_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs");
  c.batch_size = j.at("batch_size");
  c.critic_steps_per_gen_step = j.at("critic_steps_per_gen_step");
  c.learning_rate = j.at("learning_rate");
  c.beta1 = j.at("beta1");
  c.beta2 = j.at("beta2");
  c.gp_weight = j.at("gp_weight");
  c.seed = j.at("seed");
  c.checkpoint_every = j.at("checkpoint_every");
  return c;
}

bool same(const GeneratorConfig& a, const GeneratorConfig& b) { return gen_json(a) == gen_json(b); }
bool same(const CriticConfig& a, const CriticConfig& b) { return critic_json(a) == critic_json(b); }

void append_le(std::string& out, const std::vector<double>& v) {
  for (double d : v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(d);
    for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
  }
}

std::vector<double> read_le(const std::string& bytes, std::size_t& pos, std::size_t count) {
  if (bytes.size() < pos + count * 8) throw DataError("checkpoint: payload truncated");
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + 8 * k + b])) << (8 * b);
    }
    out[k] = std::bit_cast<double>(bits);
  }
  pos += count * 8;
  return out;
}

std::string slurp(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw DataError("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

std::string encode_checkpoint(const TrainingState& s) {
  ordered_json h;
  h["format"] = "pyrotime-checkpoint";
  h["version"] = 1;
  h["generator"] = gen_json(s.gen_config);
  h["critic"] = critic_json(s.critic_config);
  h["train"] = train_json(s.train_config);
  h["epoch"] = s.epoch;
  h["critic_steps"] = s.critic_steps;
  h["generator_steps"] = s.generator_steps;
  h["gen_adam_t"] = s.gen_adam_t;
  h["critic_adam_t"] = s.critic_adam_t;
  h["payload"] = {{"gen_params", s.gen_params.size()}, {"critic_params", s.critic_params.size()},
                  {"gen_m", s.gen_m.size()},           {"gen_v", s.gen_v.size()},
                  {"critic_m", s.critic_m.size()},     {"critic_v", s.critic_v.size()},
                  {"encoding", "float64-le"}};
  std::string out = h.dump() + "\n";
  for (const auto* v : {&s.gen_params, &s.critic_params, &s.gen_m, &s.gen_v, &s.critic_m, &s.critic_v}) {
    append_le(out, *v);
  }
  return out;
}

TrainingState decode_checkpoint(const std::string& bytes) {
  const std::size_t nl = bytes.find('\n');
  if (nl == std::string::npos) throw DataError("checkpoint: missing header line");
  json h;
  try {
    h = json::parse(bytes.substr(0, nl));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint header: ") + e.what());
  }
  TrainingState s;
  try {
    if (h.at("format") != "pyrotime-checkpoint") throw SchemaError("checkpoint: unexpected format");
    s.gen_config = gen_from_json(h.at("generator"));
    s.critic_config = critic_from_json(h.at("critic"));
    s.train_config = train_from_json(h.at("train"));
    s.epoch = h.at("epoch");
    s.critic_steps = h.at("critic_steps");
    s.generator_steps = h.at("generator_steps");
    s.gen_adam_t = h.at("gen_adam_t");
    s.critic_adam_t = h.at("critic_adam_t");
    const json& p = h.at("payload");
    std::size_t pos = nl + 1;
    s.gen_params = read_le(bytes, pos, p.at("gen_params"));
    s.critic_params = read_le(bytes, pos, p.at("critic_params"));
    s.gen_m = read_le(bytes, pos, p.at("gen_m"));
    s.gen_v = read_le(bytes, pos, p.at("gen_v"));
    s.critic_m = read_le(bytes, pos, p.at("critic_m"));
    s.critic_v = read_le(bytes, pos, p.at("critic_v"));
    if (pos != bytes.size()) throw DataError("checkpoint: trailing bytes after payload");
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  return s;
}

void save_checkpoint(const fs::path& path, const TrainingState& state) {
  write_file(path, encode_checkpoint(state));
}

TrainingState load_checkpoint(const fs::path& path) { return decode_checkpoint(slurp(path)); }

Generator load_generator(const fs::path& checkpoint) {
  const TrainingState s = load_checkpoint(checkpoint);
  Generator g(s.gen_config, 0);
  g.params().set_flat_values(s.gen_params);
  return g;
}

std::string EpochLog::to_json() const {
  ordered_json j;
  j["epoch"] = epoch;
  j["mismatch"] = mismatch;
  j["wasserstein"] = wasserstein;
  j["critic_loss"] = critic_loss;
  j["generator_loss"] = generator_loss;
  j["gp"] = gp;
  j["critic_steps"] = critic_steps;
  j["generator_steps"] = generator_steps;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Training

Tensor latent_batch(int n, int latent_dim, Rng& rng) {
  Tensor z({n, latent_dim, 1, 1});
  for (double& v : z.data) v = rng.normal();
  return z;
}

Tensor stack_fields(const std::vector<const NormalizedField*>& fields) {
  require(!fields.empty(), "stack_fields: no fields");
  const GridSpec& s = fields.front()->spec();
  Tensor out({static_cast<int>(fields.size()), 1, s.ny, s.nx});
  for (std::size_t b = 0; b < fields.size(); ++b) {
    if (!fields[b]->spec().same_shape(s)) throw std::invalid_argument("stack_fields: grid mismatch");
    std::copy(fields[b]->values().begin(), fields[b]->values().end(), out.sample(static_cast<int>(b)));
  }
  return out;
}

namespace {

/// Normalized (arrival, measurement) pairs of one split, cached in memory
/// when small and read from disk per batch otherwise.
class PairSource {
 public:
  PairSource(const synthmeas::DatasetManifest& m, const std::vector<synthmeas::ManifestRecord>& recs)
      : root_(m.root), records_(recs) {
    const std::size_t bytes = recs.size() * m.spec.pixel_count() * 2 * sizeof(double);
    cached_ = bytes <= (std::size_t{512} << 20);
    if (cached_) {
      for (const auto& r : recs) {
        arrivals_.push_back(load_normalized(root_ / r.arrival));
        measurements_.push_back(load_normalized(root_ / r.measurement));
      }
    }
  }

  std::size_t size() const { return records_.size(); }

  std::pair<Tensor, Tensor> batch(const std::vector<std::size_t>& idx) const {
    std::vector<NormalizedField> a, m;
    std::vector<const NormalizedField*> pa, pm;
    for (std::size_t k : idx) {
      if (cached_) {
        pa.push_back(&arrivals_[k]);
        pm.push_back(&measurements_[k]);
      } else {
        a.push_back(load_normalized(root_ / records_[k].arrival));
        m.push_back(load_normalized(root_ / records_[k].measurement));
      }
    }
    if (!cached_) {
      for (std::size_t k = 0; k < a.size(); ++k) {
        pa.push_back(&a[k]);
        pm.push_back(&m[k]);
      }
    }
    return {stack_fields(pa), stack_fields(pm)};
  }

 private:
  fs::path root_;
  std::vector<synthmeas::ManifestRecord> records_;
  bool cached_ = false;
  std::vector<NormalizedField> arrivals_, measurements_;
};

double validation_mismatch(Generator& gen, const PairSource& val, int batch, std::uint64_t seed) {
  if (val.size() == 0) return std::nan("");
  double total = 0.0;
  const int nz = gen.config().latent_dim;
  for (std::size_t start = 0; start < val.size(); start += batch) {
    std::vector<std::size_t> idx;
    for (std::size_t k = start; k < std::min(val.size(), start + batch); ++k) idx.push_back(k);
    auto [real, meas] = val.batch(idx);
    Tensor z({static_cast<int>(idx.size()), nz, 1, 1});
    for (std::size_t b = 0; b < idx.size(); ++b) {
      Rng rng(derive_seed(seed, {3, idx[b]}));
      for (int q = 0; q < nz; ++q) z.sample(static_cast<int>(b))[q] = rng.normal();
    }
    const Tensor fake = gen.sample(z, meas);
    const std::size_t per = real.shape.per_sample();
    for (std::size_t b = 0; b < idx.size(); ++b) {
      double s2 = 0.0;
      for (std::size_t q = 0; q < per; ++q) {
        const double d = fake.data[b * per + q] - real.data[b * per + q];
        s2 += d * d;
      }
      total += std::sqrt(s2);
    }
  }
  return total / val.size();
}

void check_finite(double v, long step, const char* what) {
  if (!std::isfinite(v)) throw TrainingDiverged(step, std::string(what) + " is not finite");
}

TrainingState snapshot(const GeneratorConfig& gc, const CriticConfig& cc, const TrainConfig& tc,
                       int epoch, long cs, long gs, Generator& gen, Critic& critic,
                       const nn::Adam& ga, const nn::Adam& ca) {
  TrainingState s;
  s.gen_config = gc;
  s.critic_config = cc;
  s.train_config = tc;
  s.epoch = epoch;
  s.critic_steps = cs;
  s.generator_steps = gs;
  s.gen_params = gen.params().flat_values();
  s.critic_params = critic.params().flat_values();
  s.gen_adam_t = ga.steps();
  s.critic_adam_t = ca.steps();
  s.gen_m = ga.first_moment();
  s.gen_v = ga.second_moment();
  s.critic_m = ca.first_moment();
  s.critic_v = ca.second_moment();
  return s;
}

}  // namespace

TrainResult train(const synthmeas::DatasetManifest& manifest, const GeneratorConfig& gen_cfg,
                  const CriticConfig& critic_cfg, const TrainConfig& cfg, const fs::path& out_dir,
                  const std::optional<fs::path>& resume,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  gen_cfg.validate();
  critic_cfg.validate();
  cfg.validate();
  const GridSpec& spec = manifest.spec;
  require(spec.nx == spec.ny, "train: dataset grid must be square");
  require(spec.nx == gen_cfg.input_size && spec.nx == critic_cfg.input_size,
          "train: dataset grid " + describe(spec) + " does not match the network input size " +
              std::to_string(gen_cfg.input_size));
  require(!manifest.train.empty(), "train: the training split is empty");

  Generator gen(gen_cfg, derive_seed(cfg.seed, {1}));
  Critic critic(critic_cfg, derive_seed(cfg.seed, {2}));
  nn::Adam gopt(cfg.learning_rate, cfg.beta1, cfg.beta2);
  nn::Adam copt(cfg.learning_rate, cfg.beta1, cfg.beta2);
  int start_epoch = 0;
  long critic_steps = 0, gen_steps = 0;
  if (resume) {
    const TrainingState s = load_checkpoint(*resume);
    if (!same(s.gen_config, gen_cfg) || !same(s.critic_config, critic_cfg)) {
      throw std::invalid_argument("train: checkpoint architecture differs from the requested one");
    }
    gen.params().set_flat_values(s.gen_params);
    critic.params().set_flat_values(s.critic_params);
    gopt.restore(s.gen_adam_t, s.gen_m, s.gen_v);
    copt.restore(s.critic_adam_t, s.critic_m, s.critic_v);
    start_epoch = s.epoch;
    critic_steps = s.critic_steps;
    gen_steps = s.generator_steps;
  }

  const PairSource train_set(manifest, manifest.train);
  const PairSource val_set(manifest, manifest.validation);
  fs::create_directories(out_dir);
  std::ofstream log(out_dir / "train_log.jsonl", resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write training log in " + out_dir.string());

  TrainResult result;
  const int nz = gen_cfg.latent_dim;
  for (int epoch = start_epoch + 1; epoch <= cfg.epochs; ++epoch) {
    Rng rng(derive_seed(cfg.seed, {4, static_cast<std::uint64_t>(epoch)}));
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.begin(), order.end());

    EpochLog e;
    e.epoch = epoch;
    long n_critic = 0, n_gen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::vector<std::size_t> idx(order.begin() + start,
                                         order.begin() + std::min(order.size(), start + cfg.batch_size));
      const int n = static_cast<int>(idx.size());
      auto [real, meas] = train_set.batch(idx);

      const Tensor z = latent_batch(n, nz, rng);
      std::vector<double> eps(n);
      for (double& v : eps) v = rng.uniform();
      critic.params().zero_grad();
      const WganLosses l = wgan_losses(gen, critic, real, meas, z, eps, cfg.gp_weight, true);
      ++critic_steps;
      check_finite(l.critic_loss, critic_steps, "critic loss");
      copt.step(critic.params());
      if (!critic.params().all_finite()) {
        throw TrainingDiverged(critic_steps, "critic parameters are not finite");
      }
      e.critic_loss += l.critic_loss;
      e.wasserstein += l.wasserstein;
      e.gp += l.gp;
      ++n_critic;

      if (critic_steps % cfg.critic_steps_per_gen_step == 0) {
        const Tensor zg = latent_batch(n, nz, rng);
        gen.params().zero_grad();
        FreezeGuard freeze(critic.params(), true);
        Tape tape(true);
        const auto m = tape.input(meas);
        const auto fake = gen.forward(tape, zg, m);
        const auto y = critic.forward(tape, fake, m);
        const auto& scores = tape.value(y).data;
        const double loss = -std::accumulate(scores.begin(), scores.end(), 0.0) / n;
        ++gen_steps;
        check_finite(loss, critic_steps, "generator loss");
        Tensor seed(tape.value(y).shape, -1.0 / n);
        tape.backward(y, &seed);
        gopt.step(gen.params());
        if (!gen.params().all_finite()) {
          throw TrainingDiverged(critic_steps, "generator parameters are not finite");
        }
        e.generator_loss += loss;
        ++n_gen;
      }
    }
    e.critic_loss /= n_critic;
    e.wasserstein /= n_critic;
    e.gp /= n_critic;
    if (n_gen > 0) e.generator_loss /= n_gen;
    e.critic_steps = critic_steps;
    e.generator_steps = gen_steps;
    e.mismatch = validation_mismatch(gen, val_set, cfg.batch_size, cfg.seed);

    log << e.to_json() << "\n";
    log.flush();
    result.log.push_back(e);
    const TrainingState st =
        snapshot(gen_cfg, critic_cfg, cfg, epoch, critic_steps, gen_steps, gen, critic, gopt, copt);
    save_checkpoint(out_dir / "last.ckpt", st);
    if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.ckpt", epoch);
      save_checkpoint(out_dir / name, st);
    }
    if (on_epoch) on_epoch(e);
  }
  result.state = snapshot(gen_cfg, critic_cfg, cfg, std::max(start_epoch, cfg.epochs), critic_steps,
                          gen_steps, gen, critic, gopt, copt);
  return result;
}

// ---------------------------------------------------------------------------
// Disc benchmark

synthmeas::DatasetManifest build_disc_dataset(const fs::path& out_dir, int n_train, int n_val,
                                              int size, std::uint64_t seed) {
  require(n_train >= 1 && n_val >= 0, "build_disc_dataset: need at least one training pair");
  require(size >= 8, "build_disc_dataset: size must be >= 8");
  synthmeas::DatasetManifest m;
  m.spec = GridSpec::square(size, 60.0);
  m.seed = seed;
  m.sims = {"disc"};
  m.root = out_dir;
  fs::create_directories(out_dir / "train");
  fs::create_directories(out_dir / "validation");
  for (int split = 0; split < 2; ++split) {
    const int count = split == 0 ? n_train : n_val;
    for (int k = 0; k < count; ++k) {
      synthmeas::ManifestRecord r;
      r.seed = derive_seed(seed, {static_cast<std::uint64_t>(split), static_cast<std::uint64_t>(k)});
      Rng rng(r.seed);
      const double cx = rng.uniform(0.25 * size, 0.75 * size);
      const double cy = rng.uniform(0.25 * size, 0.75 * size);
      const double radius = rng.uniform(0.18 * size, 0.36 * size);
      NormalizedField arrival(m.spec), meas(m.spec);
      for (int j = 0; j < size; ++j)
        for (int i = 0; i < size; ++i) {
          const double rho = std::hypot(i + 0.5 - cx, j + 0.5 - cy);
          const bool keep = rng.bernoulli(0.5);
          if (rho > radius) continue;
          arrival(i, j) = 0.5 * rho / radius;
          if (keep) meas(i, j) = arrival(i, j);
        }
      char stem[16];
      std::snprintf(stem, sizeof stem, "%06d", k);
      const std::string dir = split == 0 ? "train/" : "validation/";
      r.arrival = dir + stem + "_arrival.farr";
      r.measurement = dir + stem + "_meas.farr";
      save_normalized(out_dir / r.arrival, arrival);
      save_normalized(out_dir / r.measurement, meas);
      (split == 0 ? m.train : m.validation).push_back(r);
    }
  }
  std::ofstream os(out_dir / synthmeas::kManifestName);
  os << m.to_json();
  return m;
}

}  // namespace pyrotime::cwgan
