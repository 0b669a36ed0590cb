#include "safepatch/tape.hpp"

#include <atomic>
#include <cstring>

namespace safepatch {

namespace {
std::atomic<uint64_t> g_next_tape_id{1};
thread_local Tape* g_active_tape = nullptr;
} // namespace

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {
    prev_ = g_active_tape;
    g_active_tape = this;
}

Tape::~Tape() {
    g_active_tape = prev_;
}

Tape* Tape::active() {
    return g_active_tape;
}

int32_t Tape::node_of(const Tensor& t) {
    auto st = t.storage();
    if (!st) return -1;
    if (st->tape_id == id_) return st->node;
    if (!st->trainable) return -1;
    // First use of a trainable leaf under this tape.
    st->tape_id = id_;
    st->node = static_cast<int32_t>(nodes_.size());
    NodeRec rec;
    rec.leaf = st;
    rec.numel = st->data.size();
    nodes_.push_back(std::move(rec));
    return st->node;
}

void Tape::record(const Tensor& out, BackwardFn fn) {
    auto st = out.storage();
    st->tape_id = id_;
    st->node = static_cast<int32_t>(nodes_.size());
    NodeRec rec;
    rec.fn = std::move(fn);
    rec.numel = st->data.size();
    nodes_.push_back(std::move(rec));
}

std::vector<double>& Tape::grad_buf(int32_t node, size_t numel) {
    if (gbuf_.size() < nodes_.size()) gbuf_.resize(nodes_.size());
    auto& buf = gbuf_[static_cast<size_t>(node)];
    if (buf.empty()) buf.assign(numel, 0.0);
    return buf;
}

bool Tape::has_grad(int32_t node) const {
    return static_cast<size_t>(node) < gbuf_.size() && !gbuf_[static_cast<size_t>(node)].empty();
}

void Tape::backward(const Tensor& loss, std::span<Tensor* const> params) {
    if (consumed_)
        throw ContractError("backward: tape already consumed; re-run the forward pass");
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    auto st = loss.storage();
    if (st->tape_id != id_ || st->node < 0)
        throw ContractError("backward: loss is not connected to the active tape");

    const int32_t root = st->node;
    grad_buf(root, 1)[0] = 1.0;
    for (int32_t i = root; i >= 0; --i) {
        const size_t ui = static_cast<size_t>(i);
        if (ui >= gbuf_.size() || gbuf_[ui].empty()) continue;
        if (nodes_[ui].fn) nodes_[ui].fn(gbuf_[ui], *this);
    }

    for (Tensor* p : params) {
        auto ps = p->storage();
        ps->grad.assign(ps->data.size(), 0.0);
        if (ps->tape_id == id_ && ps->node >= 0 && has_grad(ps->node)) {
            const auto& g = gbuf_[static_cast<size_t>(ps->node)];
            std::memcpy(ps->grad.data(), g.data(), g.size() * sizeof(double));
        }
        // Detach so a later tape starts clean.
        ps->tape_id = 0;
        ps->node = -1;
    }

    consumed_ = true;
    nodes_.clear();
    gbuf_.clear();
    gbuf_.shrink_to_fit();
}

void backward(const Tensor& loss, std::span<Tensor* const> params) {
    Tape* tp = Tape::active();
    if (!tp)
        throw ContractError("backward: no active tape");
    tp->backward(loss, params);
}

} // namespace safepatch
