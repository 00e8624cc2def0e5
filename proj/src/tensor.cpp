#include "updd/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace updd {

namespace {

std::atomic<uint64_t> next_id{1};
thread_local Tape* current_tape = nullptr;

}  // namespace

struct Tensor::Impl {
    Shape shape;
    std::vector<Scalar> data;
    bool requires_grad = false;
    uint64_t id = 0;
};

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
    os << "]";
    return os.str();
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> data, bool requires_grad) {
    for (int64_t d : shape)
        if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw ShapeError("shape " + shape_str(shape) + " does not match " + std::to_string(data.size()) +
                         " values");
    auto impl = std::make_shared<Impl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    impl->id = next_id.fetch_add(1);
    return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), Scalar(0)); }

Tensor Tensor::full(Shape shape, Scalar value) {
    const auto n = static_cast<size_t>(shape_numel(shape));
    return from(std::move(shape), std::vector<Scalar>(n, value));
}

Tensor Tensor::scalar(Scalar value) { return from({}, {value}); }

const Shape& Tensor::shape() const { return impl_->shape; }

int64_t Tensor::dim(int axis) const {
    const int r = rank();
    if (axis < 0) axis += r;
    if (axis < 0 || axis >= r) throw ShapeError("axis out of range for shape " + shape_str(shape()));
    return impl_->shape[axis];
}

int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->data.size()); }

std::span<const Scalar> Tensor::data() const { return impl_->data; }

std::vector<Scalar> Tensor::to_vector() const { return impl_->data; }

Scalar Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
}

Scalar Tensor::at(std::initializer_list<int64_t> index) const {
    if (static_cast<int>(index.size()) != rank()) throw ShapeError("index rank mismatch");
    int64_t offset = 0;
    int axis = 0;
    for (int64_t i : index) {
        const int64_t d = impl_->shape[axis++];
        if (i < 0 || i >= d) throw ShapeError("index out of range");
        offset = offset * d + i;
    }
    return impl_->data[offset];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

uint64_t Tensor::id() const { return impl_ ? impl_->id : 0; }

Tensor Tensor::detach() const { return from(shape(), impl_->data, false); }

Tensor Tensor::as_parameter() const { return from(shape(), impl_->data, true); }

bool Tensor::same_values(const Tensor& other) const {
    return shape() == other.shape() && std::equal(data().begin(), data().end(), other.data().begin());
}

Tensor make_result(Shape shape, std::vector<Scalar> data, bool tracked) {
    for (size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i]))
            throw NumericError("non-finite value at flat index " + std::to_string(i) + " of result " +
                               shape_str(shape));
    }
    return Tensor::from(std::move(shape), std::move(data), tracked);
}

Tensor GradientMap::operator[](const Tensor& param) const {
    auto it = grads_.find(param.id());
    if (it == grads_.end()) return Tensor::zeros(param.shape());
    return it->second;
}

bool GradientMap::contains(const Tensor& param) const { return grads_.count(param.id()) != 0; }

void Tape::record(Record record) {
    if (consumed_) throw std::logic_error("tape already consumed by backward(); re-run the forward pass");
    records_.push_back(std::move(record));
}

GradientMap Tape::backward(const Tensor& loss) {
    if (consumed_) throw std::logic_error("backward() called twice on the same tape");
    consumed_ = true;
    if (loss.numel() != 1) throw ShapeError("backward() needs a scalar loss, got " + shape_str(loss.shape()));

    GradientMap result;
    if (!loss.requires_grad()) return result;

    std::unordered_map<uint64_t, std::vector<Scalar>> grads;
    std::unordered_set<uint64_t> produced;
    for (const auto& r : records_) produced.insert(r.output.id());

    grads[loss.id()] = std::vector<Scalar>(1, Scalar(1));
    std::vector<std::vector<Scalar>*> input_grads;
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
        auto found = grads.find(it->output.id());
        if (found == grads.end()) continue;
        const std::vector<Scalar> out_grad = std::move(found->second);
        grads.erase(found);

        input_grads.assign(it->inputs.size(), nullptr);
        for (size_t i = 0; i < it->inputs.size(); ++i) {
            const Tensor& in = it->inputs[i];
            if (!in.requires_grad()) continue;
            auto& g = grads[in.id()];
            if (g.empty()) g.assign(static_cast<size_t>(in.numel()), Scalar(0));
            input_grads[i] = &g;
        }
        it->backward(out_grad, input_grads);
    }

    // Whatever is left belongs to leaves (never produced by a record).
    std::unordered_map<uint64_t, const Tensor*> leaves;
    for (const auto& r : records_)
        for (const auto& in : r.inputs)
            if (in.requires_grad() && !produced.count(in.id())) leaves.emplace(in.id(), &in);
    for (auto& [id, g] : grads) {
        auto leaf = leaves.find(id);
        if (leaf == leaves.end()) continue;
        result.grads_.emplace(id, Tensor::from(leaf->second->shape(), std::move(g)));
    }
    records_.clear();
    return result;
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }

TapeScope::~TapeScope() { current_tape = previous_; }

Tape* active_tape() { return current_tape; }

bool needs_record(std::initializer_list<const Tensor*> inputs) {
    if (current_tape == nullptr) return false;
    for (const Tensor* t : inputs)
        if (t->requires_grad()) return true;
    return false;
}

bool needs_record(std::span<const Tensor> inputs) {
    if (current_tape == nullptr) return false;
    for (const Tensor& t : inputs)
        if (t.requires_grad()) return true;
    return false;
}

}  // namespace updd
