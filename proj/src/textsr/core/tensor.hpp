#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace textsr {

using real = double;

// Dense row-major tensor of doubles. Buffers are shared; reshapes and
// leading-dim slices alias the parent buffer, everything else copies.
// Ops never mutate their inputs, so aliasing stays safe.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape, real fill = 0.0)
        : shape_(std::move(shape)) {
        buf_ = std::make_shared<std::vector<real>>(count_(shape_), fill);
    }

    static Tensor from(std::vector<int> shape, std::vector<real> data) {
        Tensor t;
        t.shape_ = std::move(shape);
        if (count_(t.shape_) != static_cast<int64_t>(data.size()))
            throw std::invalid_argument("Tensor::from: data size does not match shape");
        t.buf_ = std::make_shared<std::vector<real>>(std::move(data));
        return t;
    }

    static Tensor scalar(real v) { return from({1}, {v}); }

    bool empty() const { return !buf_; }
    const std::vector<int>& shape() const { return shape_; }
    int ndim() const { return static_cast<int>(shape_.size()); }

    int dim(int i) const {
        if (i < 0 || i >= ndim()) throw std::out_of_range("Tensor::dim");
        return shape_[i];
    }

    int64_t numel() const { return count_(shape_); }

    real* data() { return buf_->data() + off_; }
    const real* data() const { return buf_->data() + off_; }

    real& operator[](int64_t i) { return data()[i]; }
    real operator[](int64_t i) const { return data()[i]; }

    real item() const {
        if (numel() != 1) throw std::invalid_argument("Tensor::item: not a scalar");
        return data()[0];
    }

    // Deep copy with its own buffer.
    Tensor clone() const {
        Tensor t;
        t.shape_ = shape_;
        t.buf_ = std::make_shared<std::vector<real>>(data(), data() + numel());
        return t;
    }

    // Aliasing reshape; element count must match.
    Tensor reshaped(std::vector<int> shape) const {
        if (count_(shape) != numel())
            throw std::invalid_argument("Tensor::reshaped: element count mismatch");
        Tensor t;
        t.shape_ = std::move(shape);
        t.buf_ = buf_;
        t.off_ = off_;
        return t;
    }

    // Aliasing slice along dim 0: rows [start, start+len).
    Tensor slice0(int start, int len) const {
        if (ndim() < 1 || start < 0 || len < 1 || start + len > shape_[0])
            throw std::invalid_argument("Tensor::slice0: bad range");
        Tensor t;
        t.shape_ = shape_;
        t.shape_[0] = len;
        t.buf_ = buf_;
        t.off_ = off_ + static_cast<int64_t>(start) * (numel() / shape_[0]);
        return t;
    }

    void fill(real v) {
        real* p = data();
        for (int64_t i = 0, n = numel(); i < n; ++i) p[i] = v;
    }

    void release() {
        buf_.reset();
        shape_.clear();
        off_ = 0;
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(shape_[i]);
        }
        return s + ")";
    }

private:
    static int64_t count_(const std::vector<int>& s) {
        int64_t n = 1;
        for (int d : s) {
            if (d <= 0) throw std::invalid_argument("Tensor: nonpositive dim");
            n *= d;
        }
        return n;
    }

    std::vector<int> shape_;
    std::shared_ptr<std::vector<real>> buf_;
    int64_t off_ = 0;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(where) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

}  // namespace textsr
