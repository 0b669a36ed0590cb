#include "safepatch/tensor.hpp"

#include <cmath>
#include <sstream>

namespace safepatch {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

void check_valid_shape(const Shape& shape, const char* where) {
    if (shape.empty())
        throw InvalidShapeError(std::string(where) + ": empty shape");
    for (int64_t e : shape) {
        if (e < 1)
            throw InvalidShapeError(std::string(where) + ": non-positive extent in " + shape_str(shape));
    }
}

void check_finite(const Tensor& t, const char* where) {
    if (!t.all_finite())
        throw NonFiniteError(std::string(where) + ": non-finite value in result");
}

Tensor Tensor::zeros(const Shape& shape) {
    check_valid_shape(shape, "zeros");
    auto st = std::make_shared<Storage>();
    st->shape = shape;
    st->data.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
    return Tensor(std::move(st));
}

Tensor Tensor::full(const Shape& shape, double value) {
    check_valid_shape(shape, "full");
    auto st = std::make_shared<Storage>();
    st->shape = shape;
    st->data.assign(static_cast<size_t>(shape_numel(shape)), value);
    return Tensor(std::move(st));
}

Tensor Tensor::from_data(const Shape& shape, std::vector<double> data) {
    check_valid_shape(shape, "from_data");
    if (shape_numel(shape) != static_cast<int64_t>(data.size()))
        throw InvalidShapeError("from_data: " + shape_str(shape) + " does not match buffer of " +
                                std::to_string(data.size()));
    auto st = std::make_shared<Storage>();
    st->shape = shape;
    st->data = std::move(data);
    return Tensor(std::move(st));
}

Tensor Tensor::scalar(double value) {
    return from_data({1}, {value});
}

Tensor Tensor::randn(const Shape& shape, Rng& rng) {
    check_valid_shape(shape, "randn");
    auto st = std::make_shared<Storage>();
    st->shape = shape;
    const size_t n = static_cast<size_t>(shape_numel(shape));
    st->data.resize(n);
    for (size_t i = 0; i < n; ++i) st->data[i] = rng.next_normal();
    return Tensor(std::move(st));
}

double Tensor::item() const {
    if (!st_ || st_->data.size() != 1)
        throw ContractError("item: tensor is not scalar");
    return st_->data[0];
}

Tensor Tensor::clone() const {
    auto st = std::make_shared<Storage>();
    st->shape = st_->shape;
    st->data = st_->data;
    return Tensor(std::move(st));
}

bool Tensor::all_finite() const {
    for (double v : st_->data)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace safepatch
