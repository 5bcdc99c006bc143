#pragma once

// Differentiable layer kernels. Each forward has a matching *_backward that
// takes the upstream gradient and returns gradients for the forward's inputs.
// Kernels are instantiated for float (runtime) and double (gradient checks).

#include "e3g/tensor.hpp"

namespace e3g {

template <typename T>
struct Conv2dGrads {
    BasicTensor<T> input;
    BasicTensor<T> weight;
    BasicTensor<T> bias;
};

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      int stride, int pad);

template <typename T>
Conv2dGrads<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight, int stride, int pad,
                               const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& input);

/// Passes the gradient where input > 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

/// Bilinear 2x upsampling, half-pixel (align_corners=false) sampling with edge clamping.
template <typename T>
BasicTensor<T> upsample_bilinear_2x(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> upsample_bilinear_2x_backward(const BasicTensor<T>& grad_out);

template <typename T>
struct GridSampleGrads {
    BasicTensor<T> feature;
    BasicTensor<T> coords;
};

/// Samples feature [N,C,H,W] at coords [N,P,2] holding normalized (x, y).
/// x = -1 is the center of column 0 and x = +1 the center of column W-1.
/// Neighbors outside the map read as zero. Output is [N,C,P].
template <typename T>
BasicTensor<T> grid_sample_bilinear(const BasicTensor<T>& feature, const BasicTensor<T>& coords);

template <typename T>
GridSampleGrads<T> grid_sample_bilinear_backward(const BasicTensor<T>& feature, const BasicTensor<T>& coords,
                                                 const BasicTensor<T>& grad_out);

template <typename T>
struct LinearGrads {
    BasicTensor<T> input;
    BasicTensor<T> weight;
    BasicTensor<T> bias;
};

/// input [N,D], weight [D',D], bias [D'] -> [N,D'].
template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                               const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& input);

/// Gradient through sigmoid given its forward output.
template <typename T>
BasicTensor<T> sigmoid_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> tanh(const BasicTensor<T>& input);

template <typename T>
BasicTensor<T> tanh_backward(const BasicTensor<T>& output, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
struct LossResult {
    T value{};
    BasicTensor<T> grad;  // d(value)/d(pred)
};

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy. Predictions are clamped to [1e-7, 1-1e-7].
template <typename T>
LossResult<T> bce_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target);

/// Mean smooth-L1 over elements whose mask entry is nonzero (all elements
/// when mask is empty). Returns zero loss if the mask selects nothing.
template <typename T>
LossResult<T> smooth_l1_loss(const BasicTensor<T>& pred, const BasicTensor<T>& target, T beta,
                             const BasicTensor<T>& mask = {});

}  // namespace e3g
