#include "focuslab/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "focuslab/error.hpp"
#include "focuslab/rng.hpp"

namespace focuslab::model {

void ModelConfig::validate() const {
  if (encoder_channels.empty()) throw InvalidArgument("model: at least one encoder block is required");
  for (int c : encoder_channels)
    if (c < 1) throw InvalidArgument("model: encoder channel counts must be >= 1");
  if (width < 1 || height < 1) throw InvalidArgument("model: input size must be positive");
  const int div = 1 << blocks();
  if (width % div != 0 || height % div != 0)
    throw InvalidArgument("model: input size must be divisible by 2^" + std::to_string(blocks()));
  if (categories < 2) throw InvalidArgument("model: need at least two heatmap categories");
  if (recurrent_width < 1) throw InvalidArgument("model: recurrent width must be >= 1");
  if (!std::isfinite(lambda_heatmap) || lambda_heatmap < 0) throw InvalidArgument("model: lambda must be finite and >= 0");
}

std::vector<int> ModelConfig::decoder_channels() const {
  std::vector<int> out;
  for (int level = blocks() - 1; level >= 0; --level)
    out.push_back(level > 0 ? encoder_channels[level - 1] : std::max(1, encoder_channels[0] / 2));
  return out;
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::reduced() {
  ModelConfig c;
  c.width = c.height = 16;
  c.encoder_channels = {2, 4, 8};
  c.recurrent_width = 8;
  return c;
}

std::vector<TensorInfo> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<TensorInfo> out;
  int in = 1;
  for (int i = 0; i < cfg.blocks(); ++i) {
    const int c = cfg.encoder_channels[i];
    out.push_back({"enc" + std::to_string(i) + ".weight", c, in * 9});
    out.push_back({"enc" + std::to_string(i) + ".bias", c, 1});
    in = c;
  }
  const auto dec = cfg.decoder_channels();
  int prev = cfg.feature_channels();
  for (int j = 0; j < cfg.blocks(); ++j) {
    const int level = cfg.blocks() - 1 - j;
    const int cin = prev + cfg.encoder_channels[level];
    out.push_back({"dec" + std::to_string(j) + ".weight", dec[j], cin * 9});
    out.push_back({"dec" + std::to_string(j) + ".bias", dec[j], 1});
    prev = dec[j];
  }
  out.push_back({"seg.weight", cfg.categories, prev});
  out.push_back({"seg.bias", cfg.categories, 1});
  const int H = cfg.recurrent_width;
  out.push_back({"lstm.weight", 4 * H, cfg.feature_channels() + H});
  out.push_back({"lstm.bias", 4 * H, 1});
  out.push_back({"head.weight", 1, H});
  out.push_back({"head.bias", 1, 1});
  return out;
}

namespace {

// Tensor slots in declaration order.
struct Slots {
  int n;
  int enc_w(int i) const { return 2 * i; }
  int enc_b(int i) const { return 2 * i + 1; }
  int dec_w(int j) const { return 2 * n + 2 * j; }
  int dec_b(int j) const { return 2 * n + 2 * j + 1; }
  int seg_w() const { return 4 * n; }
  int seg_b() const { return 4 * n + 1; }
  int lstm_w() const { return 4 * n + 2; }
  int lstm_b() const { return 4 * n + 3; }
  int head_w() const { return 4 * n + 4; }
  int head_b() const { return 4 * n + 5; }
};

template <class T>
void require_finite(const Matrix<T>& m, const std::string& layer) {
  if (!m.allFinite()) throw NumericError("non-finite activation in layer " + layer);
}

// 3x3 zero-padded patches: row = channel * 9 + ky * 3 + kx, column = y * w + x.
template <class T>
Matrix<T> im2col(const Matrix<T>& x, int h, int w) {
  const int c = static_cast<int>(x.rows());
  Matrix<T> cols = Matrix<T>::Zero(c * 9, h * w);
  for (int ch = 0; ch < c; ++ch) {
    const T* src = x.row(ch).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = cols.row(ch * 9 + ky * 3 + kx).data();
        const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const T* srow = src + sy * w + (kx - 1);
          T* drow = dst + y * w;
          for (int xx = x0; xx < x1; ++xx) drow[xx] = srow[xx];
        }
      }
  }
  return cols;
}

template <class T>
Matrix<T> col2im(const Matrix<T>& cols, int c, int h, int w) {
  Matrix<T> x = Matrix<T>::Zero(c, h * w);
  for (int ch = 0; ch < c; ++ch) {
    T* dst = x.row(ch).data();
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = cols.row(ch * 9 + ky * 3 + kx).data();
        const int x0 = std::max(0, 1 - kx), x1 = std::min(w, w + 1 - kx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          T* drow = dst + sy * w + (kx - 1);
          const T* srow = src + y * w;
          for (int xx = x0; xx < x1; ++xx) drow[xx] += srow[xx];
        }
      }
  }
  return x;
}

template <class T>
Matrix<T> conv3x3(const Matrix<T>& weight, const Matrix<T>& bias, const Matrix<T>& x, int h, int w) {
  Matrix<T> z = weight * im2col(x, h, w);
  z.colwise() += bias.col(0);
  return z;
}

template <class T>
Matrix<T> maxpool2(const Matrix<T>& a, int h, int w, std::vector<int>& argmax) {
  const int c = static_cast<int>(a.rows());
  const int oh = h / 2, ow = w / 2;
  Matrix<T> p(c, oh * ow);
  argmax.assign(static_cast<std::size_t>(c) * oh * ow, 0);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int best = (2 * y) * w + 2 * x;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            const int idx = (2 * y + dy) * w + 2 * x + dx;
            if (a(ch, idx) > a(ch, best)) best = idx;
          }
        p(ch, y * ow + x) = a(ch, best);
        argmax[static_cast<std::size_t>(ch) * oh * ow + y * ow + x] = best;
      }
  return p;
}

template <class T>
Matrix<T> maxpool2_backward(const Matrix<T>& dp, const std::vector<int>& argmax, int h, int w) {
  const int c = static_cast<int>(dp.rows());
  const int k = static_cast<int>(dp.cols());
  Matrix<T> da = Matrix<T>::Zero(c, h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < k; ++i) da(ch, argmax[static_cast<std::size_t>(ch) * k + i]) += dp(ch, i);
  return da;
}

template <class T>
Matrix<T> upsample2(const Matrix<T>& p, int h, int w) {
  const int c = static_cast<int>(p.rows());
  Matrix<T> u(c, 4 * h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) u(ch, y * 2 * w + x) = p(ch, (y / 2) * w + x / 2);
  return u;
}

template <class T>
Matrix<T> upsample2_backward(const Matrix<T>& du, int h, int w) {
  const int c = static_cast<int>(du.rows());
  Matrix<T> dp = Matrix<T>::Zero(c, h * w);
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < 2 * w; ++x) dp(ch, (y / 2) * w + x / 2) += du(ch, y * 2 * w + x);
  return dp;
}

template <class T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

} // namespace

template <class T>
BasicParams<T> BasicParams<T>::zeros(const ModelConfig& config) {
  BasicParams p;
  p.config = config;
  for (const auto& info : parameter_layout(config)) p.tensors.push_back(Matrix<T>::Zero(info.rows, info.cols));
  return p;
}

template <class T>
BasicParams<T> BasicParams<T>::random(const ModelConfig& config, std::uint64_t seed) {
  BasicParams p = zeros(config);
  Rng rng(seed);
  const Slots s{config.blocks()};
  auto fill_normal = [&](Matrix<T>& m, double stddev) {
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(stddev * rng.normal());
  };
  for (int i = 0; i < config.blocks(); ++i) {
    auto& w = p.tensors[s.enc_w(i)];
    fill_normal(w, std::sqrt(2.0 / static_cast<double>(w.cols())));
  }
  for (int j = 0; j < config.blocks(); ++j) {
    auto& w = p.tensors[s.dec_w(j)];
    fill_normal(w, std::sqrt(2.0 / static_cast<double>(w.cols())));
  }
  fill_normal(p.tensors[s.seg_w()], std::sqrt(1.0 / static_cast<double>(p.tensors[s.seg_w()].cols())));
  const int H = config.recurrent_width;
  const double bound = 1.0 / std::sqrt(static_cast<double>(H));
  auto& lw = p.tensors[s.lstm_w()];
  for (Eigen::Index i = 0; i < lw.size(); ++i) lw.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
  p.tensors[s.lstm_b()].block(H, 0, H, 1).setConstant(T(1));
  fill_normal(p.tensors[s.head_w()], 0.1 * bound);
  return p;
}

template <class T>
std::size_t BasicParams<T>::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

template <class T>
void BasicParams<T>::check_finite(const char* what) const {
  const auto layout = parameter_layout(config);
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (!tensors[i].allFinite()) throw NumericError(std::string("non-finite ") + what + " in tensor " + layout[i].name);
}

template <class T>
void BasicParams<T>::set_zero() {
  for (auto& t : tensors) t.setZero();
}

template <class T>
double BasicParams<T>::squared_norm() const {
  double s = 0.0;
  for (const auto& t : tensors) s += static_cast<double>(t.squaredNorm());
  return s;
}

template <class T>
void BasicParams<T>::add_scaled(const BasicParams& other, T scale) {
  for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i] += scale * other.tensors[i];
}

template <class T>
RecurrentState<T> RecurrentState<T>::zeros(const ModelConfig& config) {
  return {Matrix<T>::Zero(config.recurrent_width, 1), Matrix<T>::Zero(config.recurrent_width, 1)};
}

template <class T>
StepCache<T> forward_step_cached(const BasicParams<T>& params, const Image& image, const RecurrentState<T>& prev,
                                 const ForwardOptions& options) {
  const ModelConfig& cfg = params.config;
  if (image.width() != cfg.width || image.height() != cfg.height)
    throw InvalidArgument("forward_step: image is " + std::to_string(image.width()) + "x" +
                          std::to_string(image.height()) + ", model expects " + std::to_string(cfg.width) + "x" +
                          std::to_string(cfg.height));
  const int H = cfg.recurrent_width;
  if (prev.hidden.rows() != H || prev.hidden.cols() != 1 || prev.cell.rows() != H || prev.cell.cols() != 1)
    throw InvalidArgument("forward_step: recurrent state does not match recurrent_width");
  if (params.tensors.size() != parameter_layout(cfg).size())
    throw InvalidArgument("forward_step: parameter set does not match the model config");

  const int n = cfg.blocks();
  const Slots s{n};
  const auto& W = params.tensors;
  StepCache<T> cache;
  cache.prev_state = prev;
  cache.attention_forced = options.zero_attention;

  Matrix<T> x(1, cfg.width * cfg.height);
  for (std::size_t i = 0; i < image.size(); ++i) x(0, static_cast<Eigen::Index>(i)) = static_cast<T>(2.0 * image.pixels()[i] - 1.0);

  cache.pool_argmax.resize(n);
  for (int i = 0; i < n; ++i) {
    const int h = cfg.height >> i, w = cfg.width >> i;
    Matrix<T> a = conv3x3(W[s.enc_w(i)], W[s.enc_b(i)], x, h, w).cwiseMax(T(0));
    require_finite(a, "enc" + std::to_string(i));
    cache.enc_inputs.push_back(std::move(x));
    x = maxpool2(a, h, w, cache.pool_argmax[i]);
    cache.enc_activations.push_back(std::move(a));
  }
  StepActivation<T>& out = cache.out;
  out.features = x;

  Matrix<T> prev_map = out.features;
  for (int j = 0; j < n; ++j) {
    const int level = n - 1 - j;
    const int h = cfg.height >> level, w = cfg.width >> level;
    const Matrix<T> up = upsample2(prev_map, h / 2, w / 2);
    const Matrix<T>& skip = cache.enc_activations[level];
    Matrix<T> in(up.rows() + skip.rows(), up.cols());
    in << up, skip;
    Matrix<T> d = conv3x3(W[s.dec_w(j)], W[s.dec_b(j)], in, h, w).cwiseMax(T(0));
    require_finite(d, "dec" + std::to_string(j));
    cache.dec_inputs.push_back(std::move(in));
    prev_map = d;
    cache.dec_activations.push_back(std::move(d));
  }

  Matrix<T> logits = W[s.seg_w()] * prev_map;
  logits.colwise() += W[s.seg_b()].col(0);
  for (Eigen::Index p = 0; p < logits.cols(); ++p) {
    auto col = logits.col(p);
    col.array() -= col.maxCoeff();
    col = col.array().exp().matrix();
    col /= col.sum();
  }
  out.heatmap = std::move(logits);
  require_finite(out.heatmap, "heatmap");

  const int fh = cfg.feature_height(), fw = cfg.feature_width();
  const int stride = 1 << n;
  out.attention = Matrix<T>::Zero(1, fh * fw);
  if (!options.zero_attention) {
    const T inv = T(1) / static_cast<T>(stride * stride);
    for (int y = 0; y < cfg.height; ++y)
      for (int xx = 0; xx < cfg.width; ++xx)
        out.attention(0, (y / stride) * fw + xx / stride) += out.heatmap(kObjectCategory, y * cfg.width + xx) * inv;
  }

  out.pooled = attention_pool(out.features, out.attention);

  cache.lstm_input.resize(cfg.feature_channels() + H, 1);
  cache.lstm_input << out.pooled, prev.hidden;
  Matrix<T> z = W[s.lstm_w()] * cache.lstm_input + W[s.lstm_b()];
  cache.gates.resize(4 * H, 1);
  for (int k = 0; k < H; ++k) {
    cache.gates(k, 0) = sigmoid(z(k, 0));
    cache.gates(H + k, 0) = sigmoid(z(H + k, 0));
    cache.gates(2 * H + k, 0) = std::tanh(z(2 * H + k, 0));
    cache.gates(3 * H + k, 0) = sigmoid(z(3 * H + k, 0));
  }
  out.state.cell = cache.gates.block(H, 0, H, 1).cwiseProduct(prev.cell) +
                   cache.gates.block(0, 0, H, 1).cwiseProduct(cache.gates.block(2 * H, 0, H, 1));
  out.state.hidden = cache.gates.block(3 * H, 0, H, 1).cwiseProduct(out.state.cell.array().tanh().matrix());
  require_finite(out.state.hidden, "lstm");
  require_finite(out.state.cell, "lstm");

  out.focus_step = (W[s.head_w()] * out.state.hidden)(0, 0) + W[s.head_b()](0, 0);
  if (!std::isfinite(static_cast<double>(out.focus_step))) throw NumericError("non-finite activation in layer head");
  return cache;
}

template <class T>
Matrix<T> attention_pool(const Matrix<T>& features, const Matrix<T>& attention) {
  if (attention.rows() != 1 || attention.cols() != features.cols())
    throw InvalidArgument("attention_pool: attention must be 1 x " + std::to_string(features.cols()));
  return (features * attention.transpose()) / static_cast<T>(features.cols());
}

template <class T>
StepActivation<T> forward_step(const BasicParams<T>& params, const Image& image, const RecurrentState<T>& prev,
                               const ForwardOptions& options) {
  return std::move(forward_step_cached(params, image, prev, options).out);
}

double loss_focus(double pred_step, double f_best_dpt, double f_prev_dpt) {
  const double r = pred_step - (f_best_dpt - f_prev_dpt);
  return r * r;
}

double loss_focus_mean(std::span<const double> residuals) {
  if (residuals.empty()) return 0.0;
  double s = 0.0;
  for (double r : residuals) s += r * r;
  return s / static_cast<double>(residuals.size());
}

template <class T>
double loss_heatmap(const Matrix<T>& heatmap, std::span<const int> labels) {
  if (static_cast<std::size_t>(heatmap.cols()) != labels.size())
    throw InvalidArgument("loss_heatmap: label count does not match heatmap size");
  double s = 0.0;
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const int label = labels[p];
    if (label < 0 || label >= heatmap.rows()) throw InvalidArgument("loss_heatmap: label outside [0, C)");
    s -= std::log(std::max(static_cast<double>(heatmap(label, static_cast<Eigen::Index>(p))), kHeatmapFloor));
  }
  return labels.empty() ? 0.0 : s / static_cast<double>(labels.size());
}

double loss_total(double focus_loss, double heatmap_loss, double lambda) { return focus_loss + lambda * heatmap_loss; }

std::vector<int> mask_labels(const Image& mask) {
  std::vector<int> labels(mask.size());
  std::transform(mask.pixels().begin(), mask.pixels().end(), labels.begin(),
                 [](double v) { return v >= 0.5 ? kObjectCategory : 0; });
  return labels;
}

template <class T>
EpisodeLosses episode_losses(std::span<const StepRecord<T>> steps) {
  EpisodeLosses l;
  for (const auto& s : steps) {
    const double r = static_cast<double>(s.cache.out.focus_step) - s.target_step;
    l.focus += r * r;
    l.heatmap += loss_heatmap(s.cache.out.heatmap, s.labels);
    ++l.steps;
  }
  return l;
}

template <class T>
void backward(const BasicParams<T>& params, std::span<const StepRecord<T>> steps, double normalizer,
              BasicParams<T>& grads) {
  const ModelConfig& cfg = params.config;
  if (!(normalizer > 0.0)) throw InvalidArgument("backward: normalizer must be positive");
  if (grads.tensors.size() != params.tensors.size()) grads = BasicParams<T>::zeros(cfg);
  const int n = cfg.blocks();
  const Slots s{n};
  const auto& W = params.tensors;
  auto& G = grads.tensors;
  const int H = cfg.recurrent_width;
  const int C = cfg.categories;
  const int fh = cfg.feature_height(), fw = cfg.feature_width();
  const int K = fh * fw;
  const int stride = 1 << n;
  const int pixels = cfg.width * cfg.height;
  const T scale = static_cast<T>(1.0 / normalizer);
  const T ce_scale = static_cast<T>(cfg.lambda_heatmap / normalizer / pixels);

  Matrix<T> dh_next = Matrix<T>::Zero(H, 1);
  Matrix<T> dc_next = Matrix<T>::Zero(H, 1);

  for (auto it = steps.rbegin(); it != steps.rend(); ++it) {
    const StepCache<T>& c = it->cache;
    const StepActivation<T>& out = c.out;
    if (it->labels.size() != static_cast<std::size_t>(pixels))
      throw InvalidArgument("backward: label map does not match the input size");

    // Focus head.
    const T g_step = T(2) * (out.focus_step - static_cast<T>(it->target_step)) * scale;
    G[s.head_w()] += g_step * out.state.hidden.transpose();
    G[s.head_b()](0, 0) += g_step;
    Matrix<T> dh = W[s.head_w()].transpose() * g_step + dh_next;

    // LSTM cell.
    const auto ig = c.gates.block(0, 0, H, 1).array();
    const auto fg = c.gates.block(H, 0, H, 1).array();
    const auto gg = c.gates.block(2 * H, 0, H, 1).array();
    const auto og = c.gates.block(3 * H, 0, H, 1).array();
    const Eigen::Array<T, Eigen::Dynamic, 1> tc = out.state.cell.array().tanh();
    const Eigen::Array<T, Eigen::Dynamic, 1> dc = dh.array() * og * (T(1) - tc * tc) + dc_next.array();
    Matrix<T> dz(4 * H, 1);
    dz.block(0, 0, H, 1) = (dc * gg * ig * (T(1) - ig)).matrix();
    dz.block(H, 0, H, 1) = (dc * c.prev_state.cell.array() * fg * (T(1) - fg)).matrix();
    dz.block(2 * H, 0, H, 1) = (dc * ig * (T(1) - gg * gg)).matrix();
    dz.block(3 * H, 0, H, 1) = (dh.array() * tc * og * (T(1) - og)).matrix();
    dc_next = (dc * fg).matrix();
    G[s.lstm_w()] += dz * c.lstm_input.transpose();
    G[s.lstm_b()] += dz;
    const Matrix<T> dinput = W[s.lstm_w()].transpose() * dz;
    const Matrix<T> dpsi = dinput.topRows(cfg.feature_channels());
    dh_next = dinput.bottomRows(H);

    // Attention pooling: psi = phi * tau^T / K.
    const T inv_k = T(1) / static_cast<T>(K);
    Matrix<T> dphi = dpsi * out.attention * inv_k;
    const Matrix<T> dtau = (dpsi.transpose() * out.features) * inv_k;

    // Heatmap: softmax backward of the attention path plus the cross-entropy term.
    Matrix<T> dlogits(C, pixels);
    const T inv_area = T(1) / static_cast<T>(stride * stride);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const int p = y * cfg.width + x;
        const T dy_obj = c.attention_forced ? T(0) : dtau(0, (y / stride) * fw + x / stride) * inv_area;
        const T y_obj = out.heatmap(kObjectCategory, p);
        const int label = it->labels[p];
        const bool floored = static_cast<double>(out.heatmap(label, p)) < kHeatmapFloor;
        for (int k = 0; k < C; ++k) {
          const T yk = out.heatmap(k, p);
          T g = yk * ((k == kObjectCategory ? dy_obj : T(0)) - y_obj * dy_obj);
          if (!floored) g += ce_scale * (yk - (k == label ? T(1) : T(0)));
          dlogits(k, p) = g;
        }
      }

    const Matrix<T>& dec_last = c.dec_activations.back();
    G[s.seg_w()] += dlogits * dec_last.transpose();
    G[s.seg_b()] += dlogits.rowwise().sum();
    Matrix<T> dprev = W[s.seg_w()].transpose() * dlogits;

    // Decoder, shallowest block first.
    std::vector<Matrix<T>> dskip(n);
    for (int j = n - 1; j >= 0; --j) {
      const int level = n - 1 - j;
      const int h = cfg.height >> level, w = cfg.width >> level;
      const Matrix<T> dzc = dprev.cwiseProduct((c.dec_activations[j].array() > T(0)).template cast<T>().matrix());
      G[s.dec_w(j)] += dzc * im2col(c.dec_inputs[j], h, w).transpose();
      G[s.dec_b(j)] += dzc.rowwise().sum();
      const Matrix<T> din = col2im<T>(W[s.dec_w(j)].transpose() * dzc, static_cast<int>(c.dec_inputs[j].rows()), h, w);
      const int skip_ch = cfg.encoder_channels[level];
      dskip[level] = din.bottomRows(skip_ch);
      dprev = upsample2_backward<T>(din.topRows(din.rows() - skip_ch), h / 2, w / 2);
    }
    dphi += dprev;

    // Encoder, deepest block first.
    Matrix<T> dpool = std::move(dphi);
    for (int i = n - 1; i >= 0; --i) {
      const int h = cfg.height >> i, w = cfg.width >> i;
      Matrix<T> da = maxpool2_backward(dpool, c.pool_argmax[i], h, w) + dskip[i];
      const Matrix<T> dzc = da.cwiseProduct((c.enc_activations[i].array() > T(0)).template cast<T>().matrix());
      G[s.enc_w(i)] += dzc * im2col(c.enc_inputs[i], h, w).transpose();
      G[s.enc_b(i)] += dzc.rowwise().sum();
      if (i > 0) dpool = col2im<T>(W[s.enc_w(i)].transpose() * dzc, static_cast<int>(c.enc_inputs[i].rows()), h, w);
    }
  }
  grads.check_finite("gradient");
}

template struct BasicParams<float>;
template struct BasicParams<double>;
template struct RecurrentState<float>;
template struct RecurrentState<double>;

template StepCache<float> forward_step_cached(const BasicParams<float>&, const Image&, const RecurrentState<float>&,
                                              const ForwardOptions&);
template StepCache<double> forward_step_cached(const BasicParams<double>&, const Image&, const RecurrentState<double>&,
                                               const ForwardOptions&);
template StepActivation<float> forward_step(const BasicParams<float>&, const Image&, const RecurrentState<float>&,
                                            const ForwardOptions&);
template StepActivation<double> forward_step(const BasicParams<double>&, const Image&, const RecurrentState<double>&,
                                             const ForwardOptions&);
template double loss_heatmap(const Matrix<float>&, std::span<const int>);
template double loss_heatmap(const Matrix<double>&, std::span<const int>);
template Matrix<float> attention_pool(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> attention_pool(const Matrix<double>&, const Matrix<double>&);
template EpisodeLosses episode_losses(std::span<const StepRecord<float>>);
template EpisodeLosses episode_losses(std::span<const StepRecord<double>>);
template void backward(const BasicParams<float>&, std::span<const StepRecord<float>>, double, BasicParams<float>&);
template void backward(const BasicParams<double>&, std::span<const StepRecord<double>>, double, BasicParams<double>&);

} // namespace focuslab::model
