#include "e3g/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace e3g {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

[[noreturn]] void shape_error(const std::string& what, const Shape& a, const Shape& b)
{
    throw std::invalid_argument(what + ": " + a.str() + " vs " + b.str());
}

void require_rank(const Shape& s, std::size_t rank, const char* name)
{
    if (s.rank() != rank)
        throw std::invalid_argument(std::string(name) + " must have rank " + std::to_string(rank) + ", got " +
                                    s.str());
}

std::size_t conv_out_extent(std::size_t in, int k, int stride, int pad)
{
    return (in + 2 * static_cast<std::size_t>(pad) - static_cast<std::size_t>(k)) / static_cast<std::size_t>(stride) + 1;
}

// Unfold one image [C,H,W] into columns [C*k*k, Ho*Wo].
template <typename T>
void im2col(const T* img, std::size_t C, std::size_t H, std::size_t W, int k, int stride, int pad, std::size_t Ho,
            std::size_t Wo, T* col)
{
    const std::size_t HWo = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                T* row = col + ((c * k + ky) * k + kx) * HWo;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                    const long iy = static_cast<long>(oy) * stride - pad + ky;
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const long ix = static_cast<long>(ox) * stride - pad + kx;
                        const bool inside = iy >= 0 && iy < static_cast<long>(H) && ix >= 0 && ix < static_cast<long>(W);
                        row[oy * Wo + ox] = inside ? img[(c * H + iy) * W + ix] : T(0);
                    }
                }
            }
}

template <typename T>
void col2im(const T* col, std::size_t C, std::size_t H, std::size_t W, int k, int stride, int pad, std::size_t Ho,
            std::size_t Wo, T* img)
{
    const std::size_t HWo = Ho * Wo;
    for (std::size_t c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx) {
                const T* row = col + ((c * k + ky) * k + kx) * HWo;
                for (std::size_t oy = 0; oy < Ho; ++oy) {
                    const long iy = static_cast<long>(oy) * stride - pad + ky;
                    if (iy < 0 || iy >= static_cast<long>(H)) continue;
                    for (std::size_t ox = 0; ox < Wo; ++ox) {
                        const long ix = static_cast<long>(ox) * stride - pad + kx;
                        if (ix < 0 || ix >= static_cast<long>(W)) continue;
                        img[(c * H + iy) * W + ix] += row[oy * Wo + ox];
                    }
                }
            }
}

struct ConvGeometry {
    std::size_t N, Cin, H, W, Cout, Ho, Wo;
    int k;
};

template <typename T>
ConvGeometry check_conv(const BasicTensor<T>& input, const BasicTensor<T>& weight, int stride, int pad)
{
    require_rank(input.shape(), 4, "conv2d input");
    require_rank(weight.shape(), 4, "conv2d weight");
    if (input.dim(1) != weight.dim(1))
        shape_error("conv2d input channels do not match weight Cin (input vs weight)", input.shape(),
                    weight.shape());
    if (weight.dim(2) != weight.dim(3)) throw std::invalid_argument("conv2d kernel must be square: " + weight.shape().str());
    const int k = static_cast<int>(weight.dim(2));
    if (k != 1 && k != 3) throw std::invalid_argument("conv2d kernel size must be 1 or 3, got " + std::to_string(k));
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d stride must be 1 or 2");
    if (pad != 0 && pad != 1) throw std::invalid_argument("conv2d pad must be 0 or 1");
    if (input.dim(2) + 2 * pad < static_cast<std::size_t>(k) || input.dim(3) + 2 * pad < static_cast<std::size_t>(k))
        throw std::invalid_argument("conv2d input " + input.shape().str() + " smaller than kernel");
    ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), weight.dim(0), 0, 0, k};
    g.Ho = conv_out_extent(g.H, k, stride, pad);
    g.Wo = conv_out_extent(g.W, k, stride, pad);
    return g;
}

// Pixel position of a normalized coordinate, evaluated in double. Positions
// within a few ulps of T from a lattice point snap onto it, so lattice-aligned
// samples survive the normalized-coordinate round trip.
template <typename T>
double lattice_position(T coord, long extent)
{
    const double p = (static_cast<double>(coord) + 1.0) * 0.5 * static_cast<double>(extent - 1);
    const double r = std::round(p);
    const double tol = 4.0 * static_cast<double>(std::numeric_limits<T>::epsilon()) * std::max(1.0, std::abs(p));
    return std::abs(p - r) <= tol ? r : p;
}

template <typename T>
T sample_zero_padded(const T* plane, long H, long W, long y, long x)
{
    if (y < 0 || y >= H || x < 0 || x >= W) return T(0);
    return plane[y * W + x];
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      int stride, int pad)
{
    const auto g = check_conv(input, weight, stride, pad);
    if (bias.size() != g.Cout) shape_error("conv2d bias does not match Cout", bias.shape(), weight.shape());

    BasicTensor<T> out(Shape{g.N, g.Cout, g.Ho, g.Wo});
    const std::size_t K = g.Cin * g.k * g.k;
    const std::size_t HWo = g.Ho * g.Wo;
    std::vector<T> col(K * HWo);
    ConstMatMap<T> w(weight.ptr(), g.Cout, K);
    for (std::size_t n = 0; n < g.N; ++n) {
        const T* img = input.ptr() + n * g.Cin * g.H * g.W;
        const T* colp = img;
        if (!(g.k == 1 && stride == 1 && pad == 0)) {
            im2col(img, g.Cin, g.H, g.W, g.k, stride, pad, g.Ho, g.Wo, col.data());
            colp = col.data();
        }
        MatMap<T> y(out.ptr() + n * g.Cout * HWo, g.Cout, HWo);
        y.noalias() = w * ConstMatMap<T>(colp, K, HWo);
        for (std::size_t co = 0; co < g.Cout; ++co) y.row(co).array() += bias[co];
    }
    return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight, int stride, int pad,
                               const BasicTensor<T>& grad_out)
{
    const auto g = check_conv(input, weight, stride, pad);
    if (grad_out.shape() != Shape{g.N, g.Cout, g.Ho, g.Wo})
        shape_error("conv2d grad_out shape", grad_out.shape(), Shape{g.N, g.Cout, g.Ho, g.Wo});

    Conv2dGrads<T> grads{BasicTensor<T>(input.shape()), BasicTensor<T>(weight.shape()), BasicTensor<T>(Shape{g.Cout})};
    const std::size_t K = g.Cin * g.k * g.k;
    const std::size_t HWo = g.Ho * g.Wo;
    std::vector<T> col(K * HWo);
    std::vector<T> dcol(K * HWo);
    ConstMatMap<T> w(weight.ptr(), g.Cout, K);
    MatMap<T> dw(grads.weight.ptr(), g.Cout, K);
    const bool direct = g.k == 1 && stride == 1 && pad == 0;
    for (std::size_t n = 0; n < g.N; ++n) {
        const T* img = input.ptr() + n * g.Cin * g.H * g.W;
        const T* colp = img;
        if (!direct) {
            im2col(img, g.Cin, g.H, g.W, g.k, stride, pad, g.Ho, g.Wo, col.data());
            colp = col.data();
        }
        ConstMatMap<T> dy(grad_out.ptr() + n * g.Cout * HWo, g.Cout, HWo);
        dw.noalias() += dy * ConstMatMap<T>(colp, K, HWo).transpose();
        for (std::size_t co = 0; co < g.Cout; ++co) grads.bias[co] += dy.row(co).sum();

        T* dimg = grads.input.ptr() + n * g.Cin * g.H * g.W;
        if (direct) {
            MatMap<T>(dimg, K, HWo).noalias() = w.transpose() * dy;
        } else {
            MatMap<T>(dcol.data(), K, HWo).noalias() = w.transpose() * dy;
            col2im(dcol.data(), g.Cin, g.H, g.W, g.k, stride, pad, g.Ho, g.Wo, dimg);
        }
    }
    return grads;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input)
{
    BasicTensor<T> out = input;
    for (auto& v : out.data()) v = v > T(0) ? v : T(0);
    return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out)
{
    if (input.shape() != grad_out.shape()) shape_error("relu_backward", input.shape(), grad_out.shape());
    BasicTensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(input[i] > T(0))) g[i] = T(0);
    return g;
}

namespace {

struct Tap {
    std::size_t i0, i1;
    double frac;
};

// Source taps for 2x half-pixel upsampling along one axis.
Tap upsample_tap(std::size_t o, std::size_t in)
{
    double src = (static_cast<double>(o) + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    auto i0 = static_cast<std::size_t>(src);
    if (i0 > in - 1) i0 = in - 1;
    const std::size_t i1 = std::min(i0 + 1, in - 1);
    return {i0, i1, src - static_cast<double>(i0)};
}

}  // namespace

template <typename T>
BasicTensor<T> upsample_bilinear_2x(const BasicTensor<T>& input)
{
    require_rank(input.shape(), 4, "upsample input");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    BasicTensor<T> out(Shape{N, C, 2 * H, 2 * W});
    std::vector<Tap> ty(2 * H), tx(2 * W);
    for (std::size_t o = 0; o < 2 * H; ++o) ty[o] = upsample_tap(o, H);
    for (std::size_t o = 0; o < 2 * W; ++o) tx[o] = upsample_tap(o, W);
    for (std::size_t p = 0; p < N * C; ++p) {
        const T* src = input.ptr() + p * H * W;
        T* dst = out.ptr() + p * 4 * H * W;
        for (std::size_t oy = 0; oy < 2 * H; ++oy) {
            const T fy = static_cast<T>(ty[oy].frac);
            for (std::size_t ox = 0; ox < 2 * W; ++ox) {
                const T fx = static_cast<T>(tx[ox].frac);
                const T a = src[ty[oy].i0 * W + tx[ox].i0], b = src[ty[oy].i0 * W + tx[ox].i1];
                const T c = src[ty[oy].i1 * W + tx[ox].i0], d = src[ty[oy].i1 * W + tx[ox].i1];
                const T top = a + (b - a) * fx;
                const T bot = c + (d - c) * fx;
                dst[oy * 2 * W + ox] = top + (bot - top) * fy;
            }
        }
    }
    return out;
}

template <typename T>
BasicTensor<T> upsample_bilinear_2x_backward(const BasicTensor<T>& grad_out)
{
    require_rank(grad_out.shape(), 4, "upsample grad_out");
    const std::size_t N = grad_out.dim(0), C = grad_out.dim(1), H2 = grad_out.dim(2), W2 = grad_out.dim(3);
    if (H2 % 2 || W2 % 2) throw std::invalid_argument("upsample grad_out extents must be even: " + grad_out.shape().str());
    const std::size_t H = H2 / 2, W = W2 / 2;
    BasicTensor<T> g(Shape{N, C, H, W});
    std::vector<Tap> ty(H2), tx(W2);
    for (std::size_t o = 0; o < H2; ++o) ty[o] = upsample_tap(o, H);
    for (std::size_t o = 0; o < W2; ++o) tx[o] = upsample_tap(o, W);
    for (std::size_t p = 0; p < N * C; ++p) {
        const T* src = grad_out.ptr() + p * H2 * W2;
        T* dst = g.ptr() + p * H * W;
        for (std::size_t oy = 0; oy < H2; ++oy) {
            const T fy = static_cast<T>(ty[oy].frac);
            for (std::size_t ox = 0; ox < W2; ++ox) {
                const T fx = static_cast<T>(tx[ox].frac);
                const T v = src[oy * W2 + ox];
                dst[ty[oy].i0 * W + tx[ox].i0] += v * (T(1) - fy) * (T(1) - fx);
                dst[ty[oy].i0 * W + tx[ox].i1] += v * (T(1) - fy) * fx;
                dst[ty[oy].i1 * W + tx[ox].i0] += v * fy * (T(1) - fx);
                dst[ty[oy].i1 * W + tx[ox].i1] += v * fy * fx;
            }
        }
    }
    return g;
}

template <typename T>
BasicTensor<T> grid_sample_bilinear(const BasicTensor<T>& feature, const BasicTensor<T>& coords)
{
    require_rank(feature.shape(), 4, "grid_sample feature");
    require_rank(coords.shape(), 3, "grid_sample coords");
    if (coords.dim(0) != feature.dim(0) || coords.dim(2) != 2)
        shape_error("grid_sample coords must be [N,P,2] matching feature batch", coords.shape(), feature.shape());
    const std::size_t N = feature.dim(0), C = feature.dim(1), P = coords.dim(1);
    const long H = static_cast<long>(feature.dim(2)), W = static_cast<long>(feature.dim(3));
    BasicTensor<T> out(Shape{N, C, P});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < P; ++p) {
            const double px = lattice_position(coords[(n * P + p) * 2], W);
            const double py = lattice_position(coords[(n * P + p) * 2 + 1], H);
            const double fx0 = std::floor(px), fy0 = std::floor(py);
            const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
            const double ax = px - fx0, ay = py - fy0;
            for (std::size_t c = 0; c < C; ++c) {
                const T* plane = feature.ptr() + (n * C + c) * H * W;
                const double v00 = sample_zero_padded(plane, H, W, y0, x0);
                const double v01 = sample_zero_padded(plane, H, W, y0, x0 + 1);
                const double v10 = sample_zero_padded(plane, H, W, y0 + 1, x0);
                const double v11 = sample_zero_padded(plane, H, W, y0 + 1, x0 + 1);
                out[(n * C + c) * P + p] =
                    static_cast<T>((1.0 - ay) * ((1.0 - ax) * v00 + ax * v01) + ay * ((1.0 - ax) * v10 + ax * v11));
            }
        }
    return out;
}

template <typename T>
GridSampleGrads<T> grid_sample_bilinear_backward(const BasicTensor<T>& feature, const BasicTensor<T>& coords,
                                                 const BasicTensor<T>& grad_out)
{
    const std::size_t N = feature.dim(0), C = feature.dim(1), P = coords.dim(1);
    const long H = static_cast<long>(feature.dim(2)), W = static_cast<long>(feature.dim(3));
    if (grad_out.shape() != Shape{N, C, P}) shape_error("grid_sample grad_out", grad_out.shape(), Shape{N, C, P});
    GridSampleGrads<T> g{BasicTensor<T>(feature.shape()), BasicTensor<T>(coords.shape())};
    const double sx = static_cast<double>(W - 1) / 2.0, sy = static_cast<double>(H - 1) / 2.0;
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < P; ++p) {
            const double px = lattice_position(coords[(n * P + p) * 2], W);
            const double py = lattice_position(coords[(n * P + p) * 2 + 1], H);
            const double fx0 = std::floor(px), fy0 = std::floor(py);
            const long x0 = static_cast<long>(fx0), y0 = static_cast<long>(fy0);
            const double ax = px - fx0, ay = py - fy0;
            double dpx = 0, dpy = 0;
            for (std::size_t c = 0; c < C; ++c) {
                const std::size_t base = (n * C + c) * H * W;
                const T* plane = feature.ptr() + base;
                T* dplane = g.feature.ptr() + base;
                const double go = grad_out[(n * C + c) * P + p];
                const double v00 = sample_zero_padded(plane, H, W, y0, x0);
                const double v01 = sample_zero_padded(plane, H, W, y0, x0 + 1);
                const double v10 = sample_zero_padded(plane, H, W, y0 + 1, x0);
                const double v11 = sample_zero_padded(plane, H, W, y0 + 1, x0 + 1);
                dpx += go * ((1.0 - ay) * (v01 - v00) + ay * (v11 - v10));
                dpy += go * ((1.0 - ax) * (v10 - v00) + ax * (v11 - v01));
                auto scatter = [&](long yy, long xx, double wgt) {
                    if (yy >= 0 && yy < H && xx >= 0 && xx < W) dplane[yy * W + xx] += static_cast<T>(go * wgt);
                };
                scatter(y0, x0, (1.0 - ay) * (1.0 - ax));
                scatter(y0, x0 + 1, (1.0 - ay) * ax);
                scatter(y0 + 1, x0, ay * (1.0 - ax));
                scatter(y0 + 1, x0 + 1, ay * ax);
            }
            g.coords[(n * P + p) * 2] = static_cast<T>(dpx * sx);
            g.coords[(n * P + p) * 2 + 1] = static_cast<T>(dpy * sy);
        }
    return g;
}

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias)
{
    require_rank(input.shape(), 2, "linear input");
    require_rank(weight.shape(), 2, "linear weight");
    if (input.dim(1) != weight.dim(1)) shape_error("linear input D does not match weight D", input.shape(), weight.shape());
    if (bias.size() != weight.dim(0)) shape_error("linear bias does not match weight D'", bias.shape(), weight.shape());
    const std::size_t N = input.dim(0), D = input.dim(1), Dout = weight.dim(0);
    BasicTensor<T> out(Shape{N, Dout});
    MatMap<T> y(out.ptr(), N, Dout);
    y.noalias() = ConstMatMap<T>(input.ptr(), N, D) * ConstMatMap<T>(weight.ptr(), Dout, D).transpose();
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t j = 0; j < Dout; ++j) y(n, j) += bias[j];
    return out;
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out)
{
    const std::size_t N = input.dim(0), D = input.dim(1), Dout = weight.dim(0);
    if (grad_out.shape() != Shape{N, Dout}) shape_error("linear grad_out", grad_out.shape(), Shape{N, Dout});
    LinearGrads<T> g{BasicTensor<T>(input.shape()), BasicTensor<T>(weight.shape()), BasicTensor<T>(Shape{Dout})};
    ConstMatMap<T> dy(grad_out.ptr(), N, Dout);
    MatMap<T>(g.input.ptr(), N, D).noalias() = dy * ConstMatMap<T>(weight.ptr(), Dout, D);
    MatMap<T>(g.weight.ptr(), Dout, D).noalias() = dy.transpose() * ConstMatMap<T>(input.ptr(), N, D);
    for (std::size_t j = 0; j < Dout; ++j) g.bias[j] = dy.col(j).sum();
    return g;
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input)
{
    BasicTensor<T> out = input;
    for (auto& v : out.data()) v = T(1) / (T(1) + std::exp(-v));
    return out;
}

template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out)
{
    BasicTensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= output[i] * (T(1) - output[i]);
    return g;
}

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& input)
{
    BasicTensor<T> out = input;
    for (auto& v : out.data()) v = std::tanh(v);
    return out;
}

template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out)
{
    BasicTensor<T> g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= T(1) - output[i] * output[i];
    return g;
}

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b)
{
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    BasicTensor<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

template <typename T>
LossResult<T> bce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target)
{
    if (pred.shape() != target.shape()) shape_error("bce_loss", pred.shape(), target.shape());
    LossResult<T> r{T(0), BasicTensor<T>(pred.shape())};
    const T lo = static_cast<T>(kBceClamp), hi = T(1) - static_cast<T>(kBceClamp);
    const T n = static_cast<T>(pred.size());
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const T t = target[i];
        const bool clamped = pred[i] < lo || pred[i] > hi;
        const T p = std::clamp(pred[i], lo, hi);
        acc += -(static_cast<double>(t) * std::log(static_cast<double>(p)) +
                 (1.0 - static_cast<double>(t)) * std::log(1.0 - static_cast<double>(p)));
        r.grad[i] = clamped ? T(0) : (p - t) / (p * (T(1) - p)) / n;
    }
    r.value = static_cast<T>(acc / static_cast<double>(n));
    return r;
}

template <typename T>
LossResult<T> smooth_l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, T beta,
                             const BasicTensor<T>& mask)
{
    if (pred.shape() != target.shape()) shape_error("smooth_l1_loss", pred.shape(), target.shape());
    if (!mask.empty() && mask.shape() != pred.shape()) shape_error("smooth_l1_loss mask", mask.shape(), pred.shape());
    if (!(beta > T(0))) throw std::invalid_argument("smooth_l1_loss beta must be > 0");
    LossResult<T> r{T(0), BasicTensor<T>(pred.shape())};
    std::size_t count = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (mask.empty() || mask[i] != T(0)) ++count;
    if (count == 0) return r;
    const T n = static_cast<T>(count);
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask.empty() && mask[i] == T(0)) continue;
        const T d = pred[i] - target[i];
        const T ad = std::abs(d);
        if (ad < beta) {
            acc += 0.5 * static_cast<double>(d) * d / beta;
            r.grad[i] = d / beta / n;
        } else {
            acc += static_cast<double>(ad) - 0.5 * beta;
            r.grad[i] = (d > T(0) ? T(1) : T(-1)) / n;
        }
    }
    r.value = static_cast<T>(acc / static_cast<double>(count));
    return r;
}

#define E3G_INSTANTIATE_OPS(T)                                                                                     \
    template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&, int, int);  \
    template Conv2dGrads<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, int, int,                \
                                            const BasicTensor<T>&);                                                 \
    template BasicTensor<T> relu(const BasicTensor<T>&);                                                            \
    template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);                            \
    template BasicTensor<T> upsample_bilinear_2x(const BasicTensor<T>&);                                            \
    template BasicTensor<T> upsample_bilinear_2x_backward(const BasicTensor<T>&);                                   \
    template BasicTensor<T> grid_sample_bilinear(const BasicTensor<T>&, const BasicTensor<T>&);                     \
    template GridSampleGrads<T> grid_sample_bilinear_backward(const BasicTensor<T>&, const BasicTensor<T>&,         \
                                                              const BasicTensor<T>&);                               \
    template BasicTensor<T> linear(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);            \
    template LinearGrads<T> linear_backward(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);   \
    template BasicTensor<T> sigmoid(const BasicTensor<T>&);                                                         \
    template BasicTensor<T> sigmoid_backward(const BasicTensor<T>&, const BasicTensor<T>&);                         \
    template BasicTensor<T> tanh(const BasicTensor<T>&);                                                            \
    template BasicTensor<T> tanh_backward(const BasicTensor<T>&, const BasicTensor<T>&);                            \
    template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&);                                      \
    template LossResult<T> bce_loss(const BasicTensor<T>&, const BasicTensor<T>&);                                  \
    template LossResult<T> smooth_l1_loss(const BasicTensor<T>&, const BasicTensor<T>&, T, const BasicTensor<T>&);

E3G_INSTANTIATE_OPS(float)
E3G_INSTANTIATE_OPS(double)

#undef E3G_INSTANTIATE_OPS

}  // namespace e3g
