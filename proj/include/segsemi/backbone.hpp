#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "segsemi/graph.hpp"
#include "segsemi/parameter.hpp"
#include "segsemi/types.hpp"

namespace segsemi {

struct StreamConfig {
  std::size_t input_dim = 0;
  std::size_t num_classes = 0;
  std::size_t channels = 64;
  // Dual-dilated layers of the generation stage.
  std::size_t gen_layers = 11;
  std::size_t refine_stages = 3;
  std::size_t refine_layers = 10;
  double dropout = 0.5;

  std::size_t stage_count() const { return 1 + refine_stages; }
};

// Dropout is applied only when a generator is supplied.
struct ForwardContext {
  std::mt19937_64* dropout_rng = nullptr;
};

// One MS-TCN++ stream: a generation stage of dual dilated layers followed by
// single-stage TCN refinement stages. Each stage emits [T, C] log-probs.
template <class S>
class Stream {
 public:
  Stream() = default;
  Stream(const StreamConfig& config, ParameterStore<S>& store, const std::string& prefix, std::mt19937_64& init_rng);

  // Log-probabilities of every stage, generation stage first. `input` must be
  // [T, config.input_dim].
  std::vector<Var> forward(Graph<S>& g, ParameterStore<S>& store, Var input, const ForwardContext& ctx) const;

  const StreamConfig& config() const noexcept { return config_; }

 private:
  struct Conv {
    std::size_t weight = 0;
    std::size_t bias = 0;
  };
  struct DualLayer {
    Conv wide;    // dilation 2^(layers-1-i)
    Conv narrow;  // dilation 2^i
    Conv fuse;
  };
  struct ResidualLayer {
    Conv dilated;
    Conv pointwise;
  };
  struct Refinement {
    Conv in;
    std::vector<ResidualLayer> layers;
    Conv out;
  };

  Var apply(Graph<S>& g, ParameterStore<S>& store, const Conv& c, Var x, std::size_t dilation) const;

  StreamConfig config_;
  Conv gen_in_;
  std::vector<DualLayer> gen_layers_;
  Conv gen_out_;
  std::vector<Refinement> refinements_;
};

// (1/(T*C)) * sum over adjacent frames of min(tau, |dlogp|)^2.
template <class S>
Var smoothing_term(Graph<S>& g, Var logp, S tau);

// Mean frame NLL against ground truth plus beta times the smoothing term.
template <class S>
Var frame_loss_supervised(Graph<S>& g, Var logp, const FrameLabels& labels, S beta, S tau);

// alpha-weighted NLL against pseudo labels plus beta times the smoothing term.
template <class S>
Var frame_loss_unsupervised(Graph<S>& g, Var logp, const FrameLabels& pseudo_labels, S alpha, S beta, S tau);

// Scalar conveniences over detached probabilities.
double smoothing_term(const FrameProbs& probs, double tau);
double frame_loss_supervised(const FrameProbs& probs, const FrameLabels& labels, double beta, double tau);
double frame_loss_unsupervised(const FrameProbs& probs, const FrameLabels& labels, double alpha, double beta,
                               double tau);

extern template class Stream<float>;
extern template class Stream<double>;

}  // namespace segsemi
