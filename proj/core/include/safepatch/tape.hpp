#pragma once

#include <functional>
#include <span>
#include <vector>

#include "safepatch/tensor.hpp"

namespace safepatch {

// Dynamic reverse-mode tape. One tape per forward pass, thread-local
// activation, freed when backward consumes it. Ops record themselves only
// while a tape is active and at least one input is tracked (recorded output
// or trainable leaf), so frozen parameters never enter the graph.
class Tape {
public:
    using BackwardFn = std::function<void(std::span<const double> out_grad, Tape&)>;

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    uint64_t id() const { return id_; }
    size_t node_count() const { return nodes_.size(); }

    // Node id of t on this tape; registers a leaf for trainable tensors.
    // Returns -1 for untracked inputs.
    int32_t node_of(const Tensor& t);

    // Record an op output. fn scatters out_grad into the inputs' buffers.
    void record(const Tensor& out, BackwardFn fn);

    // Accumulation buffer for a node, allocated on first touch.
    std::vector<double>& grad_buf(int32_t node, size_t numel);
    bool has_grad(int32_t node) const;

    // Reverse sweep from a scalar loss; deposits gradients into exactly the
    // listed parameters (disconnected ones get zeros). Consumes the tape.
    void backward(const Tensor& loss, std::span<Tensor* const> params);

private:
    struct NodeRec {
        BackwardFn fn;                          // empty for leaves
        std::shared_ptr<Tensor::Storage> leaf;  // set for leaves
        size_t numel = 0;
    };

    uint64_t id_;
    std::vector<NodeRec> nodes_;
    std::vector<std::vector<double>> gbuf_;
    bool consumed_ = false;
    Tape* prev_ = nullptr;
};

// Convenience entry point matching the module contract: loss must be scalar
// and live on the currently active tape.
void backward(const Tensor& loss, std::span<Tensor* const> params);

} // namespace safepatch
