#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lvqa/error.hpp"

namespace lvqa {

// Trainable head: one fusion layer (ReLU) over the concatenated spatial and
// temporal information, then two regression layers (ReLU hidden, linear
// scalar output). All arithmetic is 64-bit with fixed accumulation order, so
// forward and backward are bit-stable.
struct ModelParams {
  uint32_t input_dim = 0;    // d_SI + d_TI
  uint32_t fusion_dim = 1024;
  uint32_t hidden_dim = 128;

  // Frozen per-dimension input standardization, fitted on the training set
  // and stored with the checkpoint. Empty means identity.
  std::vector<double> input_shift;
  std::vector<double> input_scale;

  std::vector<double> fusion_w;  // [fusion_dim][input_dim], row-major
  std::vector<double> fusion_b;  // [fusion_dim]
  std::vector<double> reg1_w;    // [hidden_dim][fusion_dim], row-major
  std::vector<double> reg1_b;    // [hidden_dim]
  std::vector<double> reg2_w;    // [hidden_dim]
  double reg2_b = 0.0;

  size_t parameter_count() const;
  void check_shapes() const;
  std::vector<double> normalize_input(const std::vector<double>& x) const;
};

// Seeded uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights, zero biases.
ModelParams init_params(uint32_t input_dim, uint32_t fusion_dim, uint32_t hidden_dim,
                        uint64_t seed);

// FF = max(0, W_f x + b_f) with x = si concat ti.
std::vector<double> fuse(const std::vector<double>& si, const std::vector<double>& ti,
                         const ModelParams& params);

// Q = w2 . max(0, W1 ff + b1) + b2.
double regress_clip(const std::vector<double>& ff, const ModelParams& params);

// Mean of the k per-clip scores.
double score_video(const std::vector<double>& per_clip_scores);

// Same shapes as ModelParams; accumulated by BatchTape::backward.
struct Gradients {
  std::vector<double> fusion_w, fusion_b, reg1_w, reg1_b, reg2_w;
  double reg2_b = 0.0;

  explicit Gradients(const ModelParams& params);
  void scale(double factor);
};

// Records activations during forward passes so that one backward call can
// produce exact analytic gradients for every recorded clip. The ReLU
// subgradient at 0 is 0.
class BatchTape {
 public:
  // Runs the forward pass for one clip and records its activations.
  // Returns the per-clip score Q_i.
  double forward(const ModelParams& params, const std::vector<double>& si,
                 const std::vector<double>& ti);

  // dloss_dq[i] is dL/dQ_i for the i-th recorded clip, in forward order.
  // Throws kState when no forward pass was recorded or the count mismatches.
  Gradients backward(const ModelParams& params, const std::vector<double>& dloss_dq) const;

  size_t size() const { return records_.size(); }
  void clear() { records_.clear(); }

 private:
  struct ClipRecord {
    std::vector<double> input;  // si concat ti
    std::vector<double> ff;     // post-ReLU fusion activations
    std::vector<double> hidden; // post-ReLU hidden activations
  };
  std::vector<ClipRecord> records_;
};

// Checkpoint container. Provenance pins the feature configuration a head was
// trained with; loading against a different configuration must fail loudly
// rather than score with the wrong features.
struct Checkpoint {
  // "mlp": one fused head. "mlr": spatial head + temporal head + the fitted
  // combination q = a*qs + b*qt + c.
  std::string fusion = "mlp";
  std::string provenance;   // provider ids, sampling plan, ablation, head layout
  std::string config_hash;  // hash of the full training config, informational
  ModelParams head;         // mlp head, or the spatial head under mlr
  ModelParams temporal;    // mlr only
  double mlr_a = 0.0, mlr_b = 0.0, mlr_c = 0.0;
};

// Checkpoint file (bit-exact): magic "LVQM", u32 LE version, fusion mode,
// provenance string, then each head as dims + parameters as LE f64 in the
// order fusion_w, fusion_b, reg1_w, reg1_b, reg2_w, reg2_b.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws kCompatibility unless the stored provenance matches.
void check_checkpoint_compatibility(const Checkpoint& ckpt, const std::string& expected_provenance);

}  // namespace lvqa
