#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pyrotime/nn/params.hpp"
#include "pyrotime/nn/tape.hpp"
#include "pyrotime/synthmeas.hpp"

namespace pyrotime::cwgan {

struct GeneratorConfig {
  int latent_dim = 64;
  int levels = 4;
  int dense_k = 16;
  int dense_n = 4;
  int down_p = 2;
  int down_q = 2;
  int base_width = 16;
  int input_size = 64;

  void validate() const;
  int width(int level) const;
};

struct CriticConfig {
  int levels = 4;
  int dense_k = 16;
  int dense_n = 4;
  int down_q = 2;
  int base_width = 16;
  std::vector<int> fc_widths = {64, 1};
  int input_size = 64;

  void validate() const;
  int width(int level) const;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  int critic_steps_per_gen_step = 5;
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double gp_weight = 10.0;
  std::uint64_t seed = 0;
  /// Also keep epoch_NNNN.ckpt every this many epochs (0: only last.ckpt).
  int checkpoint_every = 0;

  void validate() const;
};

/// U-Net generator with latent conditioning through CIN.
class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t init_seed);

  const GeneratorConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  /// z: [n, latent_dim, 1, 1]; measurement: [n, 1, s, s]. Output [n, 1, s, s].
  nn::Tape::Var forward(nn::Tape& tape, const nn::Tensor& z, nn::Tape::Var measurement);
  nn::Tensor sample(const nn::Tensor& z, const nn::Tensor& measurement);

 private:
  struct DenseBlock {
    int cin = 0;
    int cout = 0;
    std::vector<nn::Param*> conv_w, conv_b;
    std::vector<nn::Param*> cin_wg, cin_bg, cin_wb, cin_bb;
  };
  DenseBlock make_block(const std::string& name, int cin, int cout, Rng& rng);
  nn::Tape::Var run_block(nn::Tape& tape, DenseBlock& block, nn::Tape::Var x, const nn::Tensor& z);

  GeneratorConfig cfg_;
  nn::ParamSet params_;
  nn::Param* stem_w_ = nullptr;
  nn::Param* stem_b_ = nullptr;
  std::vector<DenseBlock> down_blocks_;
  std::vector<nn::Param*> down_w_, down_b_;
  DenseBlock bottleneck_;
  std::vector<nn::Param*> up_w_, up_b_;
  std::vector<DenseBlock> up_blocks_;
  nn::Param* head_w_ = nullptr;
  nn::Param* head_b_ = nullptr;
};

/// Critic over (arrival, measurement) pairs without normalization layers.
class Critic {
 public:
  Critic(const CriticConfig& config, std::uint64_t init_seed);

  const CriticConfig& config() const { return cfg_; }
  nn::ParamSet& params() { return params_; }
  const nn::ParamSet& params() const { return params_; }

  /// arrival and measurement: [n, 1, s, s]. Output [n, 1, 1, 1].
  nn::Tape::Var forward(nn::Tape& tape, nn::Tape::Var arrival, nn::Tape::Var measurement);
  std::vector<double> score(const nn::Tensor& arrival, const nn::Tensor& measurement);

  /// Gradient of each sample's score with respect to its arrival input.
  nn::Tensor input_gradient(const nn::Tensor& arrival, const nn::Tensor& measurement);

 private:
  struct DenseBlock {
    int cin = 0;
    int cout = 0;
    std::vector<nn::Param*> conv_w, conv_b;
  };

  CriticConfig cfg_;
  nn::ParamSet params_;
  nn::Param* stem_w_ = nullptr;
  nn::Param* stem_b_ = nullptr;
  std::vector<DenseBlock> blocks_;
  std::vector<nn::Param*> down_w_, down_b_;
  std::vector<nn::Param*> fc_w_, fc_b_;
};

struct WganLosses {
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double wasserstein = 0.0;
  double gp = 0.0;
};

/// Mean real score minus mean generated score.
double wasserstein_estimate(const std::vector<double>& real_scores,
                            const std::vector<double>& fake_scores);

/// Losses for one batch. z: [n, latent, 1, 1]; eps: n interpolation weights.
/// With accumulate_critic_grads the critic gradients of critic_loss are
/// added to the critic's parameter gradients.
WganLosses wgan_losses(Generator& gen, Critic& critic, const nn::Tensor& real,
                       const nn::Tensor& measurement, const nn::Tensor& z,
                       const std::vector<double>& eps, double gp_weight,
                       bool accumulate_critic_grads = false);

/// Central-difference check of the critic's input gradient at `n_pixels`
/// random arrival pixels; returns the largest relative error.
double gradient_check(Critic& critic, const nn::Tensor& arrival, const nn::Tensor& measurement,
                      double step = 1e-4, int n_pixels = 100, std::uint64_t seed = 0);

struct EpochLog {
  int epoch = 0;
  double mismatch = 0.0;
  double wasserstein = 0.0;
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double gp = 0.0;
  long critic_steps = 0;
  long generator_steps = 0;

  std::string to_json() const;
};

/// Everything needed to continue training.
struct TrainingState {
  GeneratorConfig gen_config;
  CriticConfig critic_config;
  TrainConfig train_config;
  int epoch = 0;  // completed epochs
  long critic_steps = 0;
  long generator_steps = 0;
  std::vector<double> gen_params, critic_params;
  std::int64_t gen_adam_t = 0, critic_adam_t = 0;
  std::vector<double> gen_m, gen_v, critic_m, critic_v;
};

void save_checkpoint(const std::filesystem::path& path, const TrainingState& state);
TrainingState load_checkpoint(const std::filesystem::path& path);
std::string encode_checkpoint(const TrainingState& state);
TrainingState decode_checkpoint(const std::string& bytes);

/// Generator ready for sampling from a checkpoint.
Generator load_generator(const std::filesystem::path& checkpoint);

struct TrainResult {
  std::vector<EpochLog> log;
  TrainingState state;
};

/// Adversarial training over the manifest's training split. Writes
/// train_log.jsonl and last.ckpt into out_dir. When `resume` names a
/// checkpoint, training continues after its last completed epoch.
TrainResult train(const synthmeas::DatasetManifest& manifest, const GeneratorConfig& gen_cfg,
                  const CriticConfig& critic_cfg, const TrainConfig& train_cfg,
                  const std::filesystem::path& out_dir,
                  const std::optional<std::filesystem::path>& resume = std::nullopt,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

/// Disc-recovery benchmark: each arrival is a disc of random center and
/// radius whose normalized value grows linearly from 0 at the center to 0.5
/// at the rim (background 1 outside); its measurement keeps each disc pixel
/// with probability 1/2. Writes FARR pairs and a manifest into out_dir.
synthmeas::DatasetManifest build_disc_dataset(const std::filesystem::path& out_dir, int n_train,
                                              int n_val, int size, std::uint64_t seed);

/// Latent batch of standard normal draws.
nn::Tensor latent_batch(int n, int latent_dim, Rng& rng);

/// Stacks normalized fields into an [n, 1, s, s] tensor.
nn::Tensor stack_fields(const std::vector<const NormalizedField*>& fields);

}  // namespace pyrotime::cwgan
