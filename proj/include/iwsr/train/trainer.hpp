// Copyright (c) 2026 The iwsr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "iwsr/field/grid.hpp"
#include "iwsr/model/superres.hpp"
#include "iwsr/physics/residuals.hpp"
#include "iwsr/sampling/edge.hpp"
#include "iwsr/train/adam.hpp"

namespace iwsr::train {

using ad::Triple;

struct TrainConfig {
  double lr = 8e-4;
  std::size_t epochs = 100;
  std::size_t blocks_per_epoch = 8000;
  std::size_t batch = 6;     // blocks per optimizer step
  std::size_t points = 1024; // query points per block
  physics::LossConfig loss;
  physics::PhysParams phys;
  Triple hr_block{16, 128, 128};  // (t, z, x)
  Triple factors{4, 8, 4};
  /// Edge sampling. Its batch size is overridden by `points`; radius 0 picks
  /// two LR cells. edge_fraction is the starting coefficient a.
  sampling::SamplingConfig sampling;
  /// Update a once per epoch from the running edge / random losses.
  bool adapt_edge = true;
  /// Points of each block (the first ones) whose PDE residuals enter the loss.
  std::size_t pde_points = 256;
  /// Whether the dataset was terrain-filled before normalisation. Inference
  /// prepares its inputs the same way.
  bool terrain_fill = true;
  std::uint64_t seed = 0;

  /// The values above with 20 epochs of 50 blocks, sized for a laptop CPU.
  static TrainConfig desk();
  Triple lr_block() const;
  /// ConfigError on non-positive sizes, gamma outside [0, 1] or blocks that
  /// are not multiples of the factors.
  void validate() const;
  /// Multi-line "key: value" summary for run headers.
  std::string describe() const;
};

/// Per-equation PDE normalisation for a dataset: the RMS over 16 seeded
/// blocks of the residual-term magnitudes of the data itself (trilinear
/// interpolant, zero pressure). Used as a floor under the per-batch scales,
/// so the PDE term cannot be lowered by shrinking the predicted fields.
std::array<double, physics::kNumEquations> reference_pde_scales(const field::FieldGrid& dataset,
                                                                const TrainConfig& cfg);

/// Everything needed to resume training or run inference.
struct Checkpoint {
  model::ModelConfig model;
  TrainConfig train;
  field::NormStats stats;
  std::vector<NamedTensor> params;  // "encoder.*", "decoder.*"
  AdamState adam;
  std::size_t epoch = 0;  // completed epochs
  double edge_coef = 0.5;
  double edge_loss = 0.0, random_loss = 0.0;  // averages of the last epoch
};

std::vector<NamedTensor> checkpoint_to_tensors(const Checkpoint& ckpt);
/// MigrationError when a required tensor is missing or malformed.
Checkpoint checkpoint_from_tensors(const std::vector<NamedTensor>& tensors);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // mean total loss over the epoch's blocks
  double pde = 0;         // mean PDE term (0 when unused)
  double mse = 0;         // mean regression loss
  double edge_loss = 0, random_loss = 0;  // mean per-point squared error by provenance
  double edge_coef = 0;   // a used during the epoch
  double next_edge_coef = 0;

  /// One "key=value" line.
  std::string to_line() const;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Owns the model, optimizer and sampling state for one training run.
class Trainer {
 public:
  /// Fresh run. The dataset must carry normalisation statistics
  /// (OrderingError otherwise).
  Trainer(const field::FieldGrid& dataset, const model::ModelConfig& model_cfg, const TrainConfig& cfg);
  /// Continue from a checkpoint with `cfg`; Adam moments are kept or reset.
  Trainer(const field::FieldGrid& dataset, const Checkpoint& ckpt, const TrainConfig& cfg, bool retain_adam = true);

  /// Runs one epoch. Throws NonFiniteLossError with the offending block seed.
  EpochLog run_epoch();
  /// Runs epochs until cfg.epochs are complete.
  std::vector<EpochLog> run(const EpochCallback& on_epoch = {});

  Checkpoint checkpoint() const;
  model::SuperResModel<float>& model() { return model_; }
  const TrainConfig& config() const { return cfg_; }
  const std::array<double, physics::kNumEquations>& pde_scales() const { return pde_scales_; }
  std::size_t epoch() const { return epoch_; }
  double edge_coef() const { return edge_coef_; }

  /// Loss of one block (no update), for diagnostics and tests.
  double block_loss(std::uint64_t block_index);

 private:
  struct BlockResult {
    double loss = 0, pde = 0, mse = 0;
    double edge_se = 0, random_se = 0;
    std::size_t n_edge = 0, n_random = 0;
  };
  BlockResult process_block(std::uint64_t block_index, double weight, bool backward);

  const field::FieldGrid& data_;
  TrainConfig cfg_;
  model::SuperResModel<float> model_;
  AdamState adam_;
  std::size_t epoch_ = 0;
  double edge_coef_ = 0.5;
  double edge_loss_ = 0, random_loss_ = 0;
  std::array<double, physics::kNumEquations> pde_scales_{};
};

/// Fresh training run over `dataset` (normalised).
Checkpoint train(const field::FieldGrid& dataset, const model::ModelConfig& model_cfg, const TrainConfig& cfg,
                 const EpochCallback& on_epoch = {}, std::vector<EpochLog>* log = nullptr);

struct FineTuneOptions {
  double lr_scale = 1.0;
  bool retain_adam = false;
  std::size_t epochs = 0;  // 0 keeps cfg.epochs
};

/// Continues training `ckpt` on a new dataset with lr * lr_scale. The new
/// dataset is normalised with the checkpoint's statistics by the caller.
Checkpoint fine_tune(const Checkpoint& ckpt, const field::FieldGrid& dataset, const TrainConfig& cfg,
                     const FineTuneOptions& opts, const EpochCallback& on_epoch = {},
                     std::vector<EpochLog>* log = nullptr);

/// Queries the decoder on the dense HR lattice of a normalised LR grid,
/// tile by tile (tiles of the encoder's input size, the last one per axis
/// aligned to the end). Returns normalised HR values with the LR terrain
/// mask repeated to HR.
field::FieldGrid super_resolve(const model::SuperResModel<float>& model, const field::FieldGrid& lr, Triple factors);

/// Physical-units inference: terrain-fills `lr`, applies the checkpoint
/// statistics, super-resolves and denormalises.
field::FieldGrid super_resolve(const Checkpoint& ckpt, const field::FieldGrid& lr, Triple factors);

}  // namespace iwsr::train
