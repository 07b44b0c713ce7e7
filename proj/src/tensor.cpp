#include "ldbn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ldbn {

std::string Shape::str() const {
    std::ostringstream os;
    os << "(" << b << "," << c << "," << h << "," << w << ")";
    return os.str();
}

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw std::invalid_argument(msg);
}

void check_finite(std::span<const double> v, const char* what) {
    for (double x : v) {
        if (!std::isfinite(x))
            throw std::runtime_error(std::string(what) + ": non-finite value produced");
    }
}

}  // namespace

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
    return from_values(s, std::vector<double>(s.count(), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& s, double value, bool requires_grad) {
    return from_values(s, std::vector<double>(s.count(), value), requires_grad);
}

Tensor Tensor::from_values(const Shape& s, std::vector<double> values, bool requires_grad) {
    require(s.b >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0,
            "tensor: negative dimension in " + s.str());
    require(static_cast<int64_t>(values.size()) == s.count(),
            "tensor: value count " + std::to_string(values.size()) +
                " does not match shape " + s.str());
    check_finite(values, "tensor");
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = s;
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

double Tensor::scalar() const {
    require(node_ && node_->shape.count() == 1,
            "tensor: scalar() called on non-scalar tensor");
    return node_->values[0];
}

double Tensor::at(int64_t b, int64_t c, int64_t h, int64_t w) const {
    const Shape& s = node_->shape;
    return node_->values[((b * s.c + c) * s.h + h) * s.w + w];
}

std::vector<double>& Tensor::grad_buffer() const {
    if (node_->grad.empty()) node_->grad.assign(node_->values.size(), 0.0);
    return node_->grad;
}

Tensor Graph::make_output(const Shape& s, std::vector<double> values, bool requires_grad,
                          const char* op_name) {
    for (double x : values) {
        if (!std::isfinite(x))
            throw std::runtime_error(std::string(op_name) + ": non-finite value produced");
    }
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = s;
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Graph::conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                     int64_t padding) {
    const Shape is = input.shape();
    const Shape ws = weight.shape();
    require(padding >= 0, "conv2d: negative padding");
    require(ws.h % 2 == 1 && ws.w % 2 == 1, "conv2d: kernel sides must be odd, got " +
                                                ws.str());
    require(ws.c == is.c, "conv2d: input channels " + std::to_string(is.c) +
                              " do not match weight " + ws.str());
    require(bias.shape() == Shape{1, ws.b, 1, 1},
            "conv2d: bias must be (1," + std::to_string(ws.b) + ",1,1), got " +
                bias.shape().str());

    const int64_t B = is.b, Cin = is.c, H = is.h, W = is.w;
    const int64_t Cout = ws.b, kh = ws.h, kw = ws.w;
    const int64_t OH = H + 2 * padding - kh + 1;
    const int64_t OW = W + 2 * padding - kw + 1;
    require(OH >= 1 && OW >= 1, "conv2d: empty output for input " + is.str() +
                                    " with kernel " + ws.str());

    std::vector<double> out(static_cast<size_t>(B * Cout * OH * OW));
    const double* inp = input.values().data();
    const double* wp = weight.values().data();
    const double* bp = bias.values().data();

    for (int64_t b = 0; b < B; ++b) {
        for (int64_t co = 0; co < Cout; ++co) {
            double* out_plane = out.data() + (b * Cout + co) * OH * OW;
            std::fill(out_plane, out_plane + OH * OW, bp[co]);
            for (int64_t ci = 0; ci < Cin; ++ci) {
                const double* in_plane = inp + (b * Cin + ci) * H * W;
                const double* wk = wp + (co * Cin + ci) * kh * kw;
                for (int64_t y = 0; y < kh; ++y) {
                    for (int64_t x = 0; x < kw; ++x) {
                        const double wv = wk[y * kw + x];
                        const int64_t oh_lo = std::max<int64_t>(0, padding - y);
                        const int64_t oh_hi = std::min(OH, H + padding - y);
                        const int64_t ow_lo = std::max<int64_t>(0, padding - x);
                        const int64_t ow_hi = std::min(OW, W + padding - x);
                        for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const double* in_row =
                                in_plane + (oh + y - padding) * W + (x - padding);
                            double* out_row = out_plane + oh * OW;
                            for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                                out_row[ow] += wv * in_row[ow];
                        }
                    }
                }
            }
        }
    }

    const bool needs =
        input.requires_grad() || weight.requires_grad() || bias.requires_grad();
    Tensor result = make_output({B, Cout, OH, OW}, std::move(out), needs, "conv2d");
    if (needs) {
        steps_.push_back([input, weight, bias, result, padding, B, Cin, H, W, Cout, kh,
                          kw, OH, OW]() {
            if (!result.has_grad()) return;
            const double* gp = result.grad().data();
            const double* inp = input.values().data();
            const double* wp = weight.values().data();

            if (input.requires_grad()) {
                std::vector<double>& gin = input.grad_buffer();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double* g_plane = gp + (b * Cout + co) * OH * OW;
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            double* gin_plane = gin.data() + (b * Cin + ci) * H * W;
                            const double* wk = wp + (co * Cin + ci) * kh * kw;
                            for (int64_t y = 0; y < kh; ++y)
                                for (int64_t x = 0; x < kw; ++x) {
                                    const double wv = wk[y * kw + x];
                                    const int64_t oh_lo = std::max<int64_t>(0, padding - y);
                                    const int64_t oh_hi = std::min(OH, H + padding - y);
                                    const int64_t ow_lo = std::max<int64_t>(0, padding - x);
                                    const int64_t ow_hi = std::min(OW, W + padding - x);
                                    for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                                        double* gin_row = gin_plane +
                                                          (oh + y - padding) * W +
                                                          (x - padding);
                                        const double* g_row = g_plane + oh * OW;
                                        for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                                            gin_row[ow] += wv * g_row[ow];
                                    }
                                }
                        }
                    }
            }
            if (weight.requires_grad()) {
                std::vector<double>& gw = weight.grad_buffer();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double* g_plane = gp + (b * Cout + co) * OH * OW;
                        for (int64_t ci = 0; ci < Cin; ++ci) {
                            const double* in_plane = inp + (b * Cin + ci) * H * W;
                            double* gwk = gw.data() + (co * Cin + ci) * kh * kw;
                            for (int64_t y = 0; y < kh; ++y)
                                for (int64_t x = 0; x < kw; ++x) {
                                    const int64_t oh_lo = std::max<int64_t>(0, padding - y);
                                    const int64_t oh_hi = std::min(OH, H + padding - y);
                                    const int64_t ow_lo = std::max<int64_t>(0, padding - x);
                                    const int64_t ow_hi = std::min(OW, W + padding - x);
                                    double acc = 0.0;
                                    for (int64_t oh = oh_lo; oh < oh_hi; ++oh) {
                                        const double* in_row = in_plane +
                                                               (oh + y - padding) * W +
                                                               (x - padding);
                                        const double* g_row = g_plane + oh * OW;
                                        for (int64_t ow = ow_lo; ow < ow_hi; ++ow)
                                            acc += g_row[ow] * in_row[ow];
                                    }
                                    gwk[y * kw + x] += acc;
                                }
                        }
                    }
            }
            if (bias.requires_grad()) {
                std::vector<double>& gb = bias.grad_buffer();
                for (int64_t b = 0; b < B; ++b)
                    for (int64_t co = 0; co < Cout; ++co) {
                        const double* g_plane = gp + (b * Cout + co) * OH * OW;
                        double acc = 0.0;
                        for (int64_t i = 0; i < OH * OW; ++i) acc += g_plane[i];
                        gb[co] += acc;
                    }
            }
        });
    }
    return result;
}

Tensor Graph::relu(const Tensor& x) {
    std::vector<double> out(x.values().begin(), x.values().end());
    for (double& v : out) v = v > 0.0 ? v : 0.0;
    Tensor result = make_output(x.shape(), std::move(out), x.requires_grad(), "relu");
    if (x.requires_grad()) {
        steps_.push_back([x, result]() {
            if (!result.has_grad()) return;
            std::vector<double>& gin = x.grad_buffer();
            std::span<const double> g = result.grad();
            std::span<const double> xv = x.values();
            for (size_t i = 0; i < gin.size(); ++i)
                if (xv[i] > 0.0) gin[i] += g[i];
        });
    }
    return result;
}

Tensor Graph::concat_channels(std::span<const Tensor> inputs) {
    require(!inputs.empty(), "concat_channels: no inputs");
    const Shape first = inputs[0].shape();
    int64_t channels = 0;
    bool needs = false;
    for (const Tensor& t : inputs) {
        const Shape s = t.shape();
        require(s.b == first.b && s.h == first.h && s.w == first.w,
                "concat_channels: mismatched batch/spatial dims " + s.str() + " vs " +
                    first.str());
        channels += s.c;
        needs = needs || t.requires_grad();
    }

    const int64_t B = first.b, H = first.h, W = first.w;
    const int64_t plane = H * W;
    std::vector<double> out(static_cast<size_t>(B * channels * plane));
    for (int64_t b = 0; b < B; ++b) {
        int64_t c_off = 0;
        for (const Tensor& t : inputs) {
            const int64_t tc = t.shape().c;
            const double* src = t.values().data() + b * tc * plane;
            std::copy(src, src + tc * plane,
                      out.data() + (b * channels + c_off) * plane);
            c_off += tc;
        }
    }

    Tensor result = make_output({B, channels, H, W}, std::move(out), needs, "concat");
    if (needs) {
        std::vector<Tensor> parts(inputs.begin(), inputs.end());
        steps_.push_back([parts, result, B, channels, plane]() {
            if (!result.has_grad()) return;
            const double* g = result.grad().data();
            for (int64_t b = 0; b < B; ++b) {
                int64_t c_off = 0;
                for (const Tensor& t : parts) {
                    const int64_t tc = t.shape().c;
                    if (t.requires_grad()) {
                        std::vector<double>& gin = t.grad_buffer();
                        const double* gsrc = g + (b * channels + c_off) * plane;
                        double* gdst = gin.data() + b * tc * plane;
                        for (int64_t i = 0; i < tc * plane; ++i) gdst[i] += gsrc[i];
                    }
                    c_off += tc;
                }
            }
        });
    }
    return result;
}

Tensor Graph::add(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "add: shape mismatch " + a.shape().str() + " vs " +
                                        b.shape().str());
    std::vector<double> out(a.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] + b.values()[i];
    const bool needs = a.requires_grad() || b.requires_grad();
    Tensor result = make_output(a.shape(), std::move(out), needs, "add");
    if (needs) {
        steps_.push_back([a, b, result]() {
            if (!result.has_grad()) return;
            std::span<const double> g = result.grad();
            if (a.requires_grad()) {
                std::vector<double>& ga = a.grad_buffer();
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                std::vector<double>& gb = b.grad_buffer();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] += g[i];
            }
        });
    }
    return result;
}

Tensor Graph::sub(const Tensor& a, const Tensor& b) {
    require(a.shape() == b.shape(), "sub: shape mismatch " + a.shape().str() + " vs " +
                                        b.shape().str());
    std::vector<double> out(a.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a.values()[i] - b.values()[i];
    const bool needs = a.requires_grad() || b.requires_grad();
    Tensor result = make_output(a.shape(), std::move(out), needs, "sub");
    if (needs) {
        steps_.push_back([a, b, result]() {
            if (!result.has_grad()) return;
            std::span<const double> g = result.grad();
            if (a.requires_grad()) {
                std::vector<double>& ga = a.grad_buffer();
                for (size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
            }
            if (b.requires_grad()) {
                std::vector<double>& gb = b.grad_buffer();
                for (size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
            }
        });
    }
    return result;
}

Tensor Graph::square(const Tensor& x) {
    std::vector<double> out(x.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = x.values()[i] * x.values()[i];
    Tensor result = make_output(x.shape(), std::move(out), x.requires_grad(), "square");
    if (x.requires_grad()) {
        steps_.push_back([x, result]() {
            if (!result.has_grad()) return;
            std::vector<double>& gin = x.grad_buffer();
            std::span<const double> g = result.grad();
            std::span<const double> xv = x.values();
            for (size_t i = 0; i < gin.size(); ++i) gin[i] += 2.0 * xv[i] * g[i];
        });
    }
    return result;
}

Tensor Graph::abs(const Tensor& x) {
    std::vector<double> out(x.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::abs(x.values()[i]);
    Tensor result = make_output(x.shape(), std::move(out), x.requires_grad(), "abs");
    if (x.requires_grad()) {
        steps_.push_back([x, result]() {
            if (!result.has_grad()) return;
            std::vector<double>& gin = x.grad_buffer();
            std::span<const double> g = result.grad();
            std::span<const double> xv = x.values();
            for (size_t i = 0; i < gin.size(); ++i) {
                if (xv[i] > 0.0)
                    gin[i] += g[i];
                else if (xv[i] < 0.0)
                    gin[i] -= g[i];
            }
        });
    }
    return result;
}

Tensor Graph::scalar_mul(const Tensor& x, double s) {
    std::vector<double> out(x.values().size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = s * x.values()[i];
    Tensor result = make_output(x.shape(), std::move(out), x.requires_grad(), "scalar_mul");
    if (x.requires_grad()) {
        steps_.push_back([x, result, s]() {
            if (!result.has_grad()) return;
            std::vector<double>& gin = x.grad_buffer();
            std::span<const double> g = result.grad();
            for (size_t i = 0; i < gin.size(); ++i) gin[i] += s * g[i];
        });
    }
    return result;
}

Tensor Graph::mean_all(const Tensor& x) {
    const int64_t n = x.shape().count();
    require(n >= 1, "mean_all: empty tensor");
    double acc = 0.0;
    for (double v : x.values()) acc += v;
    const double mean = acc / static_cast<double>(n);
    Tensor result = make_output({1, 1, 1, 1}, {mean}, x.requires_grad(), "mean_all");
    if (x.requires_grad()) {
        steps_.push_back([x, result, n]() {
            if (!result.has_grad()) return;
            const double g = result.grad()[0] / static_cast<double>(n);
            std::vector<double>& gin = x.grad_buffer();
            for (double& v : gin) v += g;
        });
    }
    return result;
}

namespace {

// dir: 0 = along width, 1 = along height
std::vector<double> forward_diff_values(const Tensor& x, int dir) {
    const Shape s = x.shape();
    std::vector<double> out(x.values().size(), 0.0);
    const double* in = x.values().data();
    const int64_t plane = s.h * s.w;
    for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
        const double* ip = in + bc * plane;
        double* op = out.data() + bc * plane;
        if (dir == 0) {
            for (int64_t y = 0; y < s.h; ++y)
                for (int64_t xx = 0; xx + 1 < s.w; ++xx)
                    op[y * s.w + xx] = ip[y * s.w + xx + 1] - ip[y * s.w + xx];
        } else {
            for (int64_t y = 0; y + 1 < s.h; ++y)
                for (int64_t xx = 0; xx < s.w; ++xx)
                    op[y * s.w + xx] = ip[(y + 1) * s.w + xx] - ip[y * s.w + xx];
        }
    }
    return out;
}

}  // namespace

Tensor Graph::forward_diff_x(const Tensor& x) {
    Tensor result =
        make_output(x.shape(), forward_diff_values(x, 0), x.requires_grad(), "forward_diff_x");
    if (x.requires_grad()) {
        steps_.push_back([x, result]() {
            if (!result.has_grad()) return;
            const Shape s = x.shape();
            const double* g = result.grad().data();
            std::vector<double>& gin = x.grad_buffer();
            const int64_t plane = s.h * s.w;
            for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
                const double* gp = g + bc * plane;
                double* gi = gin.data() + bc * plane;
                for (int64_t y = 0; y < s.h; ++y)
                    for (int64_t xx = 0; xx < s.w; ++xx) {
                        if (xx + 1 < s.w) gi[y * s.w + xx] -= gp[y * s.w + xx];
                        if (xx > 0) gi[y * s.w + xx] += gp[y * s.w + xx - 1];
                    }
            }
        });
    }
    return result;
}

Tensor Graph::forward_diff_y(const Tensor& x) {
    Tensor result =
        make_output(x.shape(), forward_diff_values(x, 1), x.requires_grad(), "forward_diff_y");
    if (x.requires_grad()) {
        steps_.push_back([x, result]() {
            if (!result.has_grad()) return;
            const Shape s = x.shape();
            const double* g = result.grad().data();
            std::vector<double>& gin = x.grad_buffer();
            const int64_t plane = s.h * s.w;
            for (int64_t bc = 0; bc < s.b * s.c; ++bc) {
                const double* gp = g + bc * plane;
                double* gi = gin.data() + bc * plane;
                for (int64_t y = 0; y < s.h; ++y)
                    for (int64_t xx = 0; xx < s.w; ++xx) {
                        if (y + 1 < s.h) gi[y * s.w + xx] -= gp[y * s.w + xx];
                        if (y > 0) gi[y * s.w + xx] += gp[(y - 1) * s.w + xx];
                    }
            }
        });
    }
    return result;
}

void Graph::backward(const Tensor& loss) {
    if (consumed_) throw std::runtime_error("backward: graph already consumed");
    require(loss.defined() && loss.shape().count() == 1,
            "backward: loss must be a single-element tensor");
    consumed_ = true;
    loss.grad_buffer()[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

}  // namespace ldbn
