#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "focuslab/image.hpp"

/// Focus-step network: a convolutional encoder (feature extractor), a U-Net style decoder
/// producing a per-pixel category heatmap (object detector), attention pooling of the
/// encoder features by the object channel, an LSTM cell and an affine focus head.
///
/// Everything is implemented for a fixed architecture with hand-written backpropagation;
/// both float (training, inference) and double (gradient checking) instantiations exist.
namespace focuslab::model {

struct ModelConfig {
  int width = 64;
  int height = 64;
  std::vector<int> encoder_channels{16, 32, 64};
  int categories = 2;
  int recurrent_width = 64;
  double lambda_heatmap = 1.0;

  /// Throws InvalidArgument unless width and height are divisible by 2^blocks and every
  /// width is positive.
  void validate() const;

  int blocks() const noexcept { return static_cast<int>(encoder_channels.size()); }
  /// Output channels of the decoder blocks, deepest first.
  std::vector<int> decoder_channels() const;
  int feature_channels() const noexcept { return encoder_channels.back(); }
  int feature_width() const noexcept { return width >> blocks(); }
  int feature_height() const noexcept { return height >> blocks(); }

  /// 64x64, channels 16/32/64, recurrent width 64, two categories.
  static ModelConfig desk();
  /// 16x16, channels 2/4/8, recurrent width 8; used for gradient checking.
  static ModelConfig reduced();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Heatmap channel treated as the tracked object.
inline constexpr int kObjectCategory = 1;
/// Floor applied to heatmap probabilities before the log in the cross-entropy.
inline constexpr double kHeatmapFloor = 1e-7;

template <class T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct TensorInfo {
  std::string name;
  int rows = 0;
  int cols = 0;
};

/// Parameter tensors in declaration order: enc{i}.weight/bias, dec{j}.weight/bias,
/// seg.weight/bias, lstm.weight/bias, head.weight/bias. Convolution weights are stored as
/// out_channels x (in_channels * 9); the LSTM weight as 4H x (features + H) with gate row
/// blocks ordered input, forget, candidate, output.
std::vector<TensorInfo> parameter_layout(const ModelConfig& config);

template <class T>
struct BasicParams {
  ModelConfig config;
  std::vector<Matrix<T>> tensors;

  static BasicParams zeros(const ModelConfig& config);
  /// He-normal convolutions, uniform LSTM weights with forget bias 1, small head.
  static BasicParams random(const ModelConfig& config, std::uint64_t seed);

  template <class U>
  BasicParams<U> cast() const {
    BasicParams<U> out;
    out.config = config;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }

  std::size_t count() const;
  /// Throws NumericError naming the first tensor holding a non-finite value.
  void check_finite(const char* what = "parameter") const;
  void set_zero();
  double squared_norm() const;
  /// this += scale * other
  void add_scaled(const BasicParams& other, T scale);
};

using ModelParams = BasicParams<float>;
using Gradients = BasicParams<float>;

template <class T>
struct RecurrentState {
  Matrix<T> hidden;
  Matrix<T> cell;
  static RecurrentState zeros(const ModelConfig& config);
};

/// Public per-step outputs.
template <class T>
struct StepActivation {
  Matrix<T> features;   ///< phi: C_phi x (h_phi * w_phi)
  Matrix<T> heatmap;    ///< Y-hat: categories x (H * W), columns sum to 1
  Matrix<T> attention;  ///< tau: 1 x (h_phi * w_phi)
  Matrix<T> pooled;     ///< psi: C_phi x 1
  RecurrentState<T> state;
  T focus_step = 0;     ///< predicted focus increment, diopters
};

/// Everything backward() needs from one forward step.
template <class T>
struct StepCache {
  StepActivation<T> out;
  RecurrentState<T> prev_state;
  std::vector<Matrix<T>> enc_inputs;       ///< input of each encoder conv
  std::vector<Matrix<T>> enc_activations;  ///< post-ReLU encoder outputs (skips)
  std::vector<std::vector<int>> pool_argmax;
  std::vector<Matrix<T>> dec_inputs;       ///< [upsampled; skip] input of each decoder conv
  std::vector<Matrix<T>> dec_activations;
  Matrix<T> gates;                         ///< activated gates i, f, g, o (4H x 1)
  Matrix<T> lstm_input;                    ///< [psi; h_prev]
  bool attention_forced = false;
};

/// psi = phi tau^T / K: global average over the K feature cells of the attention-gated
/// features. Bilinear in (features, attention).
template <class T>
Matrix<T> attention_pool(const Matrix<T>& features, const Matrix<T>& attention);

/// Optional overrides used to probe the network (tests, diagnostics).
struct ForwardOptions {
  bool zero_attention = false;
};

/// Runs one time step. Throws InvalidArgument on an image/state shape mismatch and
/// NumericError naming the layer on a non-finite activation.
template <class T>
StepActivation<T> forward_step(const BasicParams<T>& params, const Image& image, const RecurrentState<T>& prev,
                               const ForwardOptions& options = {});

template <class T>
StepCache<T> forward_step_cached(const BasicParams<T>& params, const Image& image, const RecurrentState<T>& prev,
                                 const ForwardOptions& options = {});

/// Squared error of one prediction against the step to best focus.
double loss_focus(double pred_step, double f_best_dpt, double f_prev_dpt);
/// Mean squared error over a batch of residuals (prediction minus target step).
double loss_focus_mean(std::span<const double> residuals);
/// Mean per-pixel categorical cross-entropy, probabilities floored at kHeatmapFloor.
template <class T>
double loss_heatmap(const Matrix<T>& heatmap, std::span<const int> labels);
double loss_total(double focus_loss, double heatmap_loss, double lambda);

/// Per-pixel labels from a mask: kObjectCategory where mask >= 0.5, else 0.
std::vector<int> mask_labels(const Image& mask);

/// One supervised step of an episode.
template <class T>
struct StepRecord {
  StepCache<T> cache;
  double target_step = 0.0;  ///< f_best - f_prev
  std::vector<int> labels;
};

struct EpisodeLosses {
  double focus = 0.0;    ///< sum over steps of squared focus residuals
  double heatmap = 0.0;  ///< sum over steps of mean cross-entropy
  std::size_t steps = 0;
};

template <class T>
EpisodeLosses episode_losses(std::span<const StepRecord<T>> steps);

/// Backpropagation through time over one episode for the objective
///   (1/N) sum_t (step_t - target_t)^2 + lambda (1/N) sum_t CE_t
/// with N = `normalizer` (the number of (episode, step) pairs in the batch). Gradients are
/// accumulated into `grads`. Throws NumericError naming the tensor on a non-finite gradient.
template <class T>
void backward(const BasicParams<T>& params, std::span<const StepRecord<T>> steps, double normalizer,
              BasicParams<T>& grads);

/// Checkpoint: magic "FOCUSLAB", u32 version, ModelConfig, then every tensor in declaration
/// order as (u32 name length, name, u32 rows, u32 cols, rows*cols little-endian f32).
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

} // namespace focuslab::model
