#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "qgaf/errors.hpp"
#include "qgaf/rng.hpp"

namespace qgaf {

struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> s)
        : shape(std::move(s)),
          data(std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                               std::multiplies<>()),
               0.0) {}

    std::size_t numel() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
};

// Fixed regressor architecture: conv(1->8, 3x3, pad 1) + ReLU + maxpool2,
// conv(8->16, 3x3, pad 1) + ReLU + maxpool2, GAP, fc(16->32) + ReLU,
// fc(32->1). Spatial flow on 30x30 input: 30 -> 30 -> 15 -> 15 -> 7.
namespace arch {
constexpr std::size_t kImage = 30;
constexpr std::size_t kConv1Out = 8;
constexpr std::size_t kConv2Out = 16;
constexpr std::size_t kKernel = 3;
constexpr std::size_t kFc1Out = 32;
constexpr std::size_t kPool1 = kImage / 2;        // 15
constexpr std::size_t kPool2 = kPool1 / 2;        // 7
}  // namespace arch

struct CnnParams {
    Tensor conv1_w{{arch::kConv1Out, 1, arch::kKernel, arch::kKernel}};
    Tensor conv1_b{{arch::kConv1Out}};
    Tensor conv2_w{{arch::kConv2Out, arch::kConv1Out, arch::kKernel, arch::kKernel}};
    Tensor conv2_b{{arch::kConv2Out}};
    Tensor fc1_w{{arch::kFc1Out, arch::kConv2Out}};
    Tensor fc1_b{{arch::kFc1Out}};
    Tensor fc2_w{{1, arch::kFc1Out}};
    Tensor fc2_b{{1}};

    struct Field {
        const char* name;
        Tensor CnnParams::* member;
    };

    static const std::array<Field, 8>& fields() {
        static const std::array<Field, 8> kFields = {{
            {"conv1_w", &CnnParams::conv1_w},
            {"conv1_b", &CnnParams::conv1_b},
            {"conv2_w", &CnnParams::conv2_w},
            {"conv2_b", &CnnParams::conv2_b},
            {"fc1_w", &CnnParams::fc1_w},
            {"fc1_b", &CnnParams::fc1_b},
            {"fc2_w", &CnnParams::fc2_w},
            {"fc2_b", &CnnParams::fc2_b},
        }};
        return kFields;
    }

    std::size_t parameter_count() const {
        std::size_t total = 0;
        for (const auto& f : fields()) total += (this->*f.member).numel();
        return total;
    }
};

// Manifest string pinning the architecture; hashed into checkpoints so a
// file from a different layout is rejected on load.
inline std::string architecture_manifest() {
    std::string m;
    CnnParams ref;
    for (const auto& f : CnnParams::fields()) {
        m += f.name;
        m += '[';
        const Tensor& t = ref.*f.member;
        for (std::size_t i = 0; i < t.shape.size(); ++i) {
            if (i) m += 'x';
            m += std::to_string(t.shape[i]);
        }
        m += ']';
    }
    return m;
}

inline std::uint64_t architecture_hash() {
    const std::string m = architecture_manifest();
    return fnv1a(reinterpret_cast<const unsigned char*>(m.data()), m.size());
}

struct CnnModel {
    CnnParams params;

    // Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases.
    static CnnModel init(std::uint64_t seed) {
        CnnModel model;
        RngStream rng(mix64(seed ^ 0xc33ed1afULL));
        auto fill = [&rng](Tensor& t, std::size_t fan_in, std::size_t fan_out) {
            const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
            for (double& v : t.data) v = rng.next_range(-limit, limit);
        };
        using namespace arch;
        fill(model.params.conv1_w, 1 * kKernel * kKernel, kConv1Out * kKernel * kKernel);
        fill(model.params.conv2_w, kConv1Out * kKernel * kKernel, kConv2Out * kKernel * kKernel);
        fill(model.params.fc1_w, kConv2Out, kFc1Out);
        fill(model.params.fc2_w, kFc1Out, 1);
        return model;
    }
};

namespace detail {

// out[oc] = bias[oc] + conv(in, w[oc]) with 3x3 kernels and same padding.
inline void conv3x3_forward(const double* in, std::size_t cin, std::size_t h, std::size_t w,
                            const double* weights, const double* bias, std::size_t cout,
                            double* out) {
    const std::size_t plane = h * w;
    for (std::size_t oc = 0; oc < cout; ++oc) {
        double* out_plane = out + oc * plane;
        std::fill(out_plane, out_plane + plane, bias[oc]);
        for (std::size_t ic = 0; ic < cin; ++ic) {
            const double* in_plane = in + ic * plane;
            const double* k = weights + (oc * cin + ic) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const double wv = k[ky * 3 + kx];
                    const std::size_t y0 = ky == 0 ? 1 : 0;
                    const std::size_t y1 = ky == 2 ? h - 1 : h;
                    const std::size_t x0 = kx == 0 ? 1 : 0;
                    const std::size_t x1 = kx == 2 ? w - 1 : w;
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* src = in_plane + (y + ky - 1) * w + (x0 + kx - 1);
                        double* dst = out_plane + y * w + x0;
                        for (std::size_t x = x0; x < x1; ++x) *dst++ += *src++ * wv;
                    }
                }
            }
        }
    }
}

// Accumulates dW, dB and (when d_in != nullptr) the input gradient.
inline void conv3x3_backward(const double* in, const double* d_out, std::size_t cin,
                             std::size_t h, std::size_t w, const double* weights,
                             std::size_t cout, double* d_weights, double* d_bias,
                             double* d_in) {
    const std::size_t plane = h * w;
    for (std::size_t oc = 0; oc < cout; ++oc) {
        const double* dout_plane = d_out + oc * plane;
        double bias_sum = 0.0;
        for (std::size_t i = 0; i < plane; ++i) bias_sum += dout_plane[i];
        d_bias[oc] += bias_sum;
        for (std::size_t ic = 0; ic < cin; ++ic) {
            const double* in_plane = in + ic * plane;
            const double* k = weights + (oc * cin + ic) * 9;
            double* dk = d_weights + (oc * cin + ic) * 9;
            double* din_plane = d_in ? d_in + ic * plane : nullptr;
            for (std::size_t ky = 0; ky < 3; ++ky) {
                for (std::size_t kx = 0; kx < 3; ++kx) {
                    const std::size_t y0 = ky == 0 ? 1 : 0;
                    const std::size_t y1 = ky == 2 ? h - 1 : h;
                    const std::size_t x0 = kx == 0 ? 1 : 0;
                    const std::size_t x1 = kx == 2 ? w - 1 : w;
                    double wsum = 0.0;
                    const double wv = k[ky * 3 + kx];
                    for (std::size_t y = y0; y < y1; ++y) {
                        const double* src = in_plane + (y + ky - 1) * w + (x0 + kx - 1);
                        const double* dg = dout_plane + y * w + x0;
                        if (din_plane) {
                            double* dst = din_plane + (y + ky - 1) * w + (x0 + kx - 1);
                            for (std::size_t x = x0; x < x1; ++x) {
                                wsum += *src++ * *dg;
                                *dst++ += wv * *dg++;
                            }
                        } else {
                            for (std::size_t x = x0; x < x1; ++x) wsum += *src++ * *dg++;
                        }
                    }
                    dk[ky * 3 + kx] += wsum;
                }
            }
        }
    }
}

// 2x2 stride-2 max pooling with floor sizing; records the flat argmax.
inline void maxpool2_forward(const double* in, std::size_t channels, std::size_t h,
                             std::size_t w, double* out, std::uint32_t* argmax) {
    const std::size_t oh = h / 2;
    const std::size_t ow = w / 2;
    for (std::size_t c = 0; c < channels; ++c) {
        const double* in_plane = in + c * h * w;
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t x = 0; x < ow; ++x) {
                const std::size_t base = (2 * y) * w + 2 * x;
                std::size_t best = base;
                double best_v = in_plane[base];
                for (std::size_t candidate : {base + 1, base + w, base + w + 1}) {
                    if (in_plane[candidate] > best_v) {
                        best_v = in_plane[candidate];
                        best = candidate;
                    }
                }
                const std::size_t oi = c * oh * ow + y * ow + x;
                out[oi] = best_v;
                argmax[oi] = static_cast<std::uint32_t>(c * h * w + best);
            }
        }
    }
}

inline void relu_inplace(double* v, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) v[i] = v[i] > 0.0 ? v[i] : 0.0;
}

}  // namespace detail

struct ForwardCache {
    std::size_t batch = 0;
    Tensor conv1_pre;                  // B x 8 x 30 x 30
    Tensor pool1;                      // B x 8 x 15 x 15
    std::vector<std::uint32_t> pool1_arg;
    Tensor conv2_pre;                  // B x 16 x 15 x 15
    Tensor pool2;                      // B x 16 x 7 x 7
    std::vector<std::uint32_t> pool2_arg;
    Tensor gap;                        // B x 16
    Tensor fc1_pre;                    // B x 32
    Tensor pred;                       // B x 1
};

namespace detail {

inline std::size_t checked_batch(const Tensor& batch) {
    using namespace arch;
    if (batch.shape.size() != 4 || batch.shape[1] != 1 || batch.shape[2] != kImage ||
        batch.shape[3] != kImage) {
        throw ValidationError("forward expects a B x 1 x 30 x 30 batch");
    }
    for (double v : batch.data) {
        if (!std::isfinite(v)) throw ValidationError("non-finite input value");
    }
    return batch.shape[0];
}

}  // namespace detail

inline ForwardCache forward_cached(const CnnModel& model, const Tensor& batch) {
    using namespace arch;
    const std::size_t b = detail::checked_batch(batch);
    const CnnParams& p = model.params;

    ForwardCache cache;
    cache.batch = b;
    cache.conv1_pre = Tensor({b, kConv1Out, kImage, kImage});
    cache.pool1 = Tensor({b, kConv1Out, kPool1, kPool1});
    cache.pool1_arg.resize(cache.pool1.numel());
    cache.conv2_pre = Tensor({b, kConv2Out, kPool1, kPool1});
    cache.pool2 = Tensor({b, kConv2Out, kPool2, kPool2});
    cache.pool2_arg.resize(cache.pool2.numel());
    cache.gap = Tensor({b, kConv2Out});
    cache.fc1_pre = Tensor({b, kFc1Out});
    cache.pred = Tensor({b, 1});

    std::vector<double> relu1(kConv1Out * kImage * kImage);
    std::vector<double> relu2(kConv2Out * kPool1 * kPool1);

    for (std::size_t s = 0; s < b; ++s) {
        const double* in = batch.data.data() + s * kImage * kImage;
        double* c1 = cache.conv1_pre.data.data() + s * relu1.size();
        detail::conv3x3_forward(in, 1, kImage, kImage, p.conv1_w.data.data(),
                                p.conv1_b.data.data(), kConv1Out, c1);
        std::copy(c1, c1 + relu1.size(), relu1.data());
        detail::relu_inplace(relu1.data(), relu1.size());

        double* pool1 = cache.pool1.data.data() + s * kConv1Out * kPool1 * kPool1;
        detail::maxpool2_forward(relu1.data(), kConv1Out, kImage, kImage, pool1,
                                 cache.pool1_arg.data() + s * kConv1Out * kPool1 * kPool1);

        double* c2 = cache.conv2_pre.data.data() + s * relu2.size();
        detail::conv3x3_forward(pool1, kConv1Out, kPool1, kPool1, p.conv2_w.data.data(),
                                p.conv2_b.data.data(), kConv2Out, c2);
        std::copy(c2, c2 + relu2.size(), relu2.data());
        detail::relu_inplace(relu2.data(), relu2.size());

        double* pool2 = cache.pool2.data.data() + s * kConv2Out * kPool2 * kPool2;
        detail::maxpool2_forward(relu2.data(), kConv2Out, kPool1, kPool1, pool2,
                                 cache.pool2_arg.data() + s * kConv2Out * kPool2 * kPool2);

        double* gap = cache.gap.data.data() + s * kConv2Out;
        for (std::size_t c = 0; c < kConv2Out; ++c) {
            double sum = 0.0;
            const double* plane = pool2 + c * kPool2 * kPool2;
            for (std::size_t i = 0; i < kPool2 * kPool2; ++i) sum += plane[i];
            gap[c] = sum / static_cast<double>(kPool2 * kPool2);
        }

        double* fc1 = cache.fc1_pre.data.data() + s * kFc1Out;
        for (std::size_t o = 0; o < kFc1Out; ++o) {
            double sum = p.fc1_b[o];
            const double* w = p.fc1_w.data.data() + o * kConv2Out;
            for (std::size_t i = 0; i < kConv2Out; ++i) sum += w[i] * gap[i];
            fc1[o] = sum;
        }

        double out = p.fc2_b[0];
        for (std::size_t i = 0; i < kFc1Out; ++i) {
            out += p.fc2_w[i] * (fc1[i] > 0.0 ? fc1[i] : 0.0);
        }
        cache.pred.data[s] = out;
    }
    return cache;
}

inline Tensor forward(const CnnModel& model, const Tensor& batch) {
    return forward_cached(model, batch).pred;
}

enum class LossKind { MSE, MAE };

inline const char* to_string(LossKind k) { return k == LossKind::MSE ? "MSE" : "MAE"; }

inline LossKind loss_kind_from_string(std::string_view s) {
    if (s == "MSE" || s == "mse") return LossKind::MSE;
    if (s == "MAE" || s == "mae") return LossKind::MAE;
    throw ConfigError("unknown loss kind: " + std::string(s));
}

struct LossResult {
    double value = 0.0;
    Tensor grad;  // d(loss)/d(pred), same shape as pred
};

inline LossResult loss(const Tensor& pred, const Tensor& target, LossKind kind) {
    if (!pred.same_shape(target)) throw ValidationError("loss: shape mismatch");
    const std::size_t n = pred.numel();
    if (n == 0) throw ValidationError("loss: empty prediction");
    LossResult result;
    result.grad = Tensor(pred.shape);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = pred[i] - target[i];
        if (kind == LossKind::MSE) {
            result.value += r * r * inv_n;
            result.grad[i] = 2.0 * r * inv_n;
        } else {
            result.value += std::abs(r) * inv_n;
            result.grad[i] = r > 0.0 ? inv_n : (r < 0.0 ? -inv_n : 0.0);
        }
    }
    return result;
}

// Backpropagate d(loss)/d(pred) through the cached forward pass.
inline CnnParams backward_from(const CnnModel& model, const Tensor& batch,
                               const ForwardCache& cache, const Tensor& d_pred) {
    using namespace arch;
    const CnnParams& p = model.params;
    CnnParams grads;
    const std::size_t b = cache.batch;

    std::vector<double> d_gap(kConv2Out);
    std::vector<double> d_pool2(kConv2Out * kPool2 * kPool2);
    std::vector<double> d_relu2(kConv2Out * kPool1 * kPool1);
    std::vector<double> d_pool1(kConv1Out * kPool1 * kPool1);
    std::vector<double> d_relu1(kConv1Out * kImage * kImage);

    for (std::size_t s = 0; s < b; ++s) {
        const double dp = d_pred[s];

        // fc2
        const double* fc1_pre = cache.fc1_pre.data.data() + s * kFc1Out;
        std::array<double, kFc1Out> d_fc1pre{};
        for (std::size_t i = 0; i < kFc1Out; ++i) {
            const double act = fc1_pre[i] > 0.0 ? fc1_pre[i] : 0.0;
            grads.fc2_w[i] += dp * act;
            d_fc1pre[i] = fc1_pre[i] > 0.0 ? dp * p.fc2_w[i] : 0.0;
        }
        grads.fc2_b[0] += dp;

        // fc1
        const double* gap = cache.gap.data.data() + s * kConv2Out;
        std::fill(d_gap.begin(), d_gap.end(), 0.0);
        for (std::size_t o = 0; o < kFc1Out; ++o) {
            const double g = d_fc1pre[o];
            if (g == 0.0) continue;
            grads.fc1_b[o] += g;
            double* dw = grads.fc1_w.data.data() + o * kConv2Out;
            const double* w = p.fc1_w.data.data() + o * kConv2Out;
            for (std::size_t i = 0; i < kConv2Out; ++i) {
                dw[i] += g * gap[i];
                d_gap[i] += g * w[i];
            }
        }

        // GAP spreads its gradient uniformly over the pooled plane.
        const double inv_plane = 1.0 / static_cast<double>(kPool2 * kPool2);
        for (std::size_t c = 0; c < kConv2Out; ++c) {
            const double g = d_gap[c] * inv_plane;
            double* plane = d_pool2.data() + c * kPool2 * kPool2;
            std::fill(plane, plane + kPool2 * kPool2, g);
        }

        // pool2 scatter, then ReLU mask onto conv2 pre-activations.
        std::fill(d_relu2.begin(), d_relu2.end(), 0.0);
        const std::uint32_t* arg2 = cache.pool2_arg.data() + s * kConv2Out * kPool2 * kPool2;
        for (std::size_t i = 0; i < kConv2Out * kPool2 * kPool2; ++i) {
            d_relu2[arg2[i]] += d_pool2[i];
        }
        const double* c2 = cache.conv2_pre.data.data() + s * d_relu2.size();
        for (std::size_t i = 0; i < d_relu2.size(); ++i) {
            if (c2[i] <= 0.0) d_relu2[i] = 0.0;
        }

        // conv2
        const double* pool1 = cache.pool1.data.data() + s * kConv1Out * kPool1 * kPool1;
        std::fill(d_pool1.begin(), d_pool1.end(), 0.0);
        detail::conv3x3_backward(pool1, d_relu2.data(), kConv1Out, kPool1, kPool1,
                                 p.conv2_w.data.data(), kConv2Out, grads.conv2_w.data.data(),
                                 grads.conv2_b.data.data(), d_pool1.data());

        // pool1 scatter, ReLU mask, conv1 (input gradient not needed).
        std::fill(d_relu1.begin(), d_relu1.end(), 0.0);
        const std::uint32_t* arg1 = cache.pool1_arg.data() + s * kConv1Out * kPool1 * kPool1;
        for (std::size_t i = 0; i < kConv1Out * kPool1 * kPool1; ++i) {
            d_relu1[arg1[i]] += d_pool1[i];
        }
        const double* c1 = cache.conv1_pre.data.data() + s * d_relu1.size();
        for (std::size_t i = 0; i < d_relu1.size(); ++i) {
            if (c1[i] <= 0.0) d_relu1[i] = 0.0;
        }
        const double* in = batch.data.data() + s * kImage * kImage;
        detail::conv3x3_backward(in, d_relu1.data(), 1, kImage, kImage, p.conv1_w.data.data(),
                                 kConv1Out, grads.conv1_w.data.data(),
                                 grads.conv1_b.data.data(), nullptr);
    }
    return grads;
}

struct BackwardResult {
    double loss_value = 0.0;
    CnnParams grads;
};

inline BackwardResult backward(const CnnModel& model, const Tensor& batch,
                               const Tensor& targets, LossKind kind) {
    const ForwardCache cache = forward_cached(model, batch);
    const LossResult l = loss(cache.pred, targets, kind);
    return BackwardResult{l.value, backward_from(model, batch, cache, l.grad)};
}

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    CnnParams m;
    CnnParams v;
    std::uint64_t step = 0;
};

// One Adam update with bias correction.
inline void adam_step(CnnModel& model, const CnnParams& grads, AdamState& state,
                      const AdamConfig& cfg) {
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    for (const auto& f : CnnParams::fields()) {
        Tensor& w = model.params.*f.member;
        const Tensor& g = grads.*f.member;
        Tensor& m = state.m.*f.member;
        Tensor& v = state.v.*f.member;
        for (std::size_t i = 0; i < w.numel(); ++i) {
            if (!std::isfinite(g[i])) {
                throw TrainingFailure("non-finite gradient in " + std::string(f.name) + "[" +
                                      std::to_string(i) + "]");
            }
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double m_hat = m[i] / bc1;
            const double v_hat = v[i] / bc2;
            w[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
        }
    }
}

}  // namespace qgaf
