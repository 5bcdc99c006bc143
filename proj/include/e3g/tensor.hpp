#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace e3g {

/// Extents of a dense tensor, outermost first. Rank is at most 4.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }
    explicit Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_.at(i); }
    const std::vector<std::size_t>& dims() const { return dims_; }

    std::size_t numel() const
    {
        if (dims_.empty()) return 0;
        return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
    }

    bool operator==(const Shape&) const = default;

    std::string str() const
    {
        std::ostringstream os;
        os << "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "x" : "") << dims_[i];
        os << "]";
        return os.str();
    }

private:
    void validate() const
    {
        if (dims_.size() > 4) throw std::invalid_argument("tensor rank > 4: " + str());
        for (auto d : dims_)
            if (d == 0) throw std::invalid_argument("tensor extent must be >= 1: " + str());
    }

    std::vector<std::size_t> dims_;
};

/// Dense row-major tensor. Float storage is the default; the double
/// instantiation exists for gradient checking.
template <typename T>
class BasicTensor {
public:
    using value_type = T;

    BasicTensor() = default;
    explicit BasicTensor(Shape shape, T fill = T(0)) : shape_(std::move(shape)), data_(shape_.numel(), fill) {}
    BasicTensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data))
    {
        if (data_.size() != shape_.numel())
            throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_.str());
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.rank(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<T> data() { return data_; }
    std::span<const T> data() const { return data_; }
    T* ptr() { return data_.data(); }
    const T* ptr() const { return data_.data(); }
    std::vector<T>& storage() { return data_; }
    const std::vector<T>& storage() const { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    // 4-D accessor in NCHW order; lower ranks use the trailing indices.
    T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[offset(n, c, h, w)]; }
    const T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const
    {
        return data_[offset(n, c, h, w)];
    }

    /// Same data, new extents. The element count must not change.
    BasicTensor reshaped(Shape shape) const
    {
        if (shape.numel() != data_.size())
            throw std::invalid_argument("cannot reshape " + shape_.str() + " to " + shape.str());
        return BasicTensor(std::move(shape), data_);
    }

    template <typename U>
    BasicTensor<U> cast() const
    {
        std::vector<U> out(data_.begin(), data_.end());
        return BasicTensor<U>(shape_, std::move(out));
    }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    bool operator==(const BasicTensor&) const = default;

private:
    std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const
    {
        const auto& d = shape_.dims();
        return ((n * d[1] + c) * d[2] + h) * d[3] + w;
    }

    Shape shape_;
    std::vector<T> data_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

}  // namespace e3g
