#pragma once

#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "useg/common.hpp"

namespace useg {

using Shape = std::vector<size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << ")";
    return os.str();
}

inline size_t shape_numel(const Shape& s) {
    return std::accumulate(s.begin(), s.end(), size_t{1}, std::multiplies<size_t>());
}

// Dense row-major numeric array. The scalar type is a template parameter so
// the same operator code runs in float for production and in double for
// finite-difference verification.
template <typename T>
class TensorT {
public:
    using value_type = T;

    TensorT() = default;

    explicit TensorT(Shape shape) : shape_(std::move(shape)), data_(shape_numel(shape_), T(0)) {}

    TensorT(Shape shape, std::vector<T> values) : shape_(std::move(shape)), data_(std::move(values)) {
        if (data_.size() != shape_numel(shape_))
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static TensorT zeros(Shape shape) { return TensorT(std::move(shape)); }

    static TensorT full(Shape shape, T v) {
        TensorT t(std::move(shape));
        std::fill(t.data_.begin(), t.data_.end(), v);
        return t;
    }

    static TensorT scalar(T v) { return TensorT({1}, {v}); }

    const Shape& shape() const { return shape_; }
    size_t rank() const { return shape_.size(); }
    size_t dim(size_t i) const { return shape_.at(i); }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& vec() { return data_; }
    const std::vector<T>& vec() const { return data_; }

    T& operator[](size_t i) { return data_[i]; }
    const T& operator[](size_t i) const { return data_[i]; }

    T& at2(size_t i, size_t j) { return data_[i * shape_[1] + j]; }
    const T& at2(size_t i, size_t j) const { return data_[i * shape_[1] + j]; }

    T& at3(size_t i, size_t j, size_t k) { return data_[(i * shape_[1] + j) * shape_[2] + k]; }
    const T& at3(size_t i, size_t j, size_t k) const { return data_[(i * shape_[1] + j) * shape_[2] + k]; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    TensorT reshaped(Shape s) const {
        if (shape_numel(s) != numel())
            throw ShapeError("cannot reshape " + shape_str(shape_) + " to " + shape_str(s));
        TensorT t = *this;
        t.shape_ = std::move(s);
        return t;
    }

    bool same_shape(const TensorT& o) const { return shape_ == o.shape_; }

    bool all_finite() const {
        for (const T& v : data_)
            if (!is_finite(v)) return false;
        return true;
    }

    template <typename U>
    TensorT<U> cast() const {
        TensorT<U> out(shape_);
        for (size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    Shape shape_;
    std::vector<T> data_;
};

using Tensor = TensorT<float>;

template <typename T>
void require_shape(const TensorT<T>& t, const Shape& want, const char* who) {
    if (t.shape() != want)
        throw ShapeError(std::string(who) + ": expected shape " + shape_str(want) + ", got " +
                         shape_str(t.shape()));
}

}  // namespace useg
