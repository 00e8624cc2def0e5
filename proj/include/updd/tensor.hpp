#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "updd/errors.hpp"

#ifndef UPDD_REAL
#define UPDD_REAL float
#endif

namespace updd {

// Element type of every tensor. The default build uses 32-bit floats; the
// gradient-check build compiles the same sources with double.
using Scalar = UPDD_REAL;

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Immutable dense row-major tensor. Copies share the underlying buffer.
class Tensor {
   public:
    Tensor() = default;

    static Tensor from(Shape shape, std::vector<Scalar> data, bool requires_grad = false);
    static Tensor zeros(Shape shape);
    static Tensor full(Shape shape, Scalar value);
    static Tensor scalar(Scalar value);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const;
    int rank() const { return static_cast<int>(shape().size()); }
    // Negative axes count from the back.
    int64_t dim(int axis) const;
    int64_t numel() const;
    std::span<const Scalar> data() const;
    std::vector<Scalar> to_vector() const;
    Scalar item() const;
    Scalar at(std::initializer_list<int64_t> index) const;

    bool requires_grad() const;
    uint64_t id() const;

    // Leaf sharing this tensor's values without gradient tracking.
    Tensor detach() const;
    // Leaf sharing this tensor's values that gradients are accumulated for.
    Tensor as_parameter() const;

    bool same_values(const Tensor& other) const;

   private:
    struct Impl;
    explicit Tensor(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<const Impl> impl_;

    friend class Tape;
    friend Tensor make_result(Shape shape, std::vector<Scalar> data, bool tracked);
};

// Builds a primitive's output. Checks that every value is finite.
Tensor make_result(Shape shape, std::vector<Scalar> data, bool tracked);

// Gradients of a scalar loss with respect to the tracked leaves that fed it.
class GradientMap {
   public:
    // Parameters the loss never touched map to zeros of their own shape.
    Tensor operator[](const Tensor& param) const;
    bool contains(const Tensor& param) const;
    size_t size() const { return grads_.size(); }

   private:
    std::unordered_map<uint64_t, Tensor> grads_;
    friend class Tape;
};

// Accumulates into the input gradient buffers given the output gradient.
// Entries of `input_grads` are null for inputs that do not need gradients.
using BackwardFn =
    std::function<void(std::span<const Scalar> out_grad, std::span<std::vector<Scalar>* const> input_grads)>;

struct Record {
    std::string kind;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
};

// Ordered log of primitive applications for one forward pass. Confined to a
// single thread; replayed once in reverse by backward().
class Tape {
   public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void record(Record record);
    size_t size() const { return records_.size(); }
    GradientMap backward(const Tensor& loss);

   private:
    std::vector<Record> records_;
    bool consumed_ = false;
};

// Makes `tape` the active record for the current thread for its lifetime.
class TapeScope {
   public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

   private:
    Tape* previous_;
};

Tape* active_tape();

// True when a primitive over `inputs` must be recorded.
bool needs_record(std::initializer_list<const Tensor*> inputs);
bool needs_record(std::span<const Tensor> inputs);

}  // namespace updd
