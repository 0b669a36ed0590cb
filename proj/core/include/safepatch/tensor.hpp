#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "safepatch/error.hpp"
#include "safepatch/rng.hpp"

namespace safepatch {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense float64 tensor. Copies share storage; contents are immutable after
// creation except through optimizer steps and explicit init writes.
// tape_id/node tie a tensor to the autodiff tape of the current forward pass.
class Tensor {
public:
    struct Storage {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;      // empty until backward deposits
        bool trainable = false;
        uint64_t tape_id = 0;          // id of the tape this was recorded on
        int32_t node = -1;             // node index on that tape
    };

    Tensor() = default;

    static Tensor zeros(const Shape& shape);
    static Tensor full(const Shape& shape, double value);
    static Tensor from_data(const Shape& shape, std::vector<double> data);
    static Tensor scalar(double value);
    // i.i.d. standard normals; advances rng.counter by exactly numel.
    static Tensor randn(const Shape& shape, Rng& rng);

    bool defined() const { return st_ != nullptr; }
    const Shape& shape() const { return st_->shape; }
    int64_t numel() const { return static_cast<int64_t>(st_->data.size()); }
    int64_t dim(size_t i) const { return st_->shape[i]; }
    size_t rank() const { return st_->shape.size(); }

    double* data() { return st_->data.data(); }
    const double* data() const { return st_->data.data(); }
    std::span<const double> span() const { return st_->data; }
    double item() const;

    bool has_grad() const { return st_ && !st_->grad.empty(); }
    std::span<const double> grad() const { return st_->grad; }
    double* grad_data() { return st_->grad.data(); }
    void clear_grad() { st_->grad.clear(); }

    bool trainable() const { return st_ && st_->trainable; }
    void set_trainable(bool on) { st_->trainable = on; }

    bool same_storage(const Tensor& other) const { return st_ == other.st_; }
    bool same_shape(const Tensor& other) const { return st_->shape == other.st_->shape; }

    // Deep copy; the clone starts untracked and untrainable.
    Tensor clone() const;

    bool all_finite() const;

    std::shared_ptr<Storage> storage() const { return st_; }

private:
    explicit Tensor(std::shared_ptr<Storage> st) : st_(std::move(st)) {}
    std::shared_ptr<Storage> st_;

    friend class Tape;
};

void check_valid_shape(const Shape& shape, const char* where);
void check_finite(const Tensor& t, const char* where);

} // namespace safepatch
