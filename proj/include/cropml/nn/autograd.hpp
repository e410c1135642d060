#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cropml/common.hpp"

namespace cropml::nn {

// Reverse-mode autodiff over dense matrices. A Tape is built per forward
// pass; backward() walks it in reverse. Node values are never mutated after
// creation, so a tape can be replayed for inspection.

class Tape {
public:
    using NodeId = int;

    NodeId constant(Matrix v) { return push(std::move(v), {}); }

    // leaf whose gradient the caller wants back
    NodeId leaf(Matrix v) { return push(std::move(v), {}); }

    const Matrix& value(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Matrix& grad(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    NodeId matmul(NodeId a, NodeId b) {
        Matrix v = value(a) * value(b);
        NodeId out = push(std::move(v), [this, a, b](NodeId o) {
            add_grad(a, grad_of(o) * value(b).transpose());
            add_grad(b, value(a).transpose() * grad_of(o));
        });
        return out;
    }

    NodeId add(NodeId a, NodeId b) {
        Matrix v = value(a) + value(b);
        return push(std::move(v), [this, a, b](NodeId o) {
            add_grad(a, grad_of(o));
            add_grad(b, grad_of(o));
        });
    }

    // add a 1 x w bias row to every row of an m x w matrix
    NodeId add_bias(NodeId a, NodeId bias) {
        Matrix v = value(a).rowwise() + value(bias).row(0);
        return push(std::move(v), [this, a, bias](NodeId o) {
            add_grad(a, grad_of(o));
            add_grad(bias, grad_of(o).colwise().sum());
        });
    }

    NodeId relu(NodeId a) {
        Matrix v = value(a).cwiseMax(0.0);
        return push(std::move(v), [this, a](NodeId o) {
            Matrix mask = (value(a).array() > 0.0).cast<double>();
            add_grad(a, grad_of(o).cwiseProduct(mask));
        });
    }

    NodeId scale(NodeId a, double s) {
        Matrix v = value(a) * s;
        return push(std::move(v), [this, a, s](NodeId o) { add_grad(a, grad_of(o) * s); });
    }

    // inverted dropout with a caller-provided 0/1 mask (already scaled)
    NodeId dropout(NodeId a, const Matrix& scaled_mask) {
        Matrix v = value(a).cwiseProduct(scaled_mask);
        Matrix m = scaled_mask;
        return push(std::move(v), [this, a, m](NodeId o) {
            add_grad(a, grad_of(o).cwiseProduct(m));
        });
    }

    // out(i,:) = x(i) * P(i,:) where x is a constant column of scalars
    NodeId row_scale(NodeId p, const Vector& x) {
        Matrix v = value(p);
        for (Eigen::Index i = 0; i < v.rows(); ++i) v.row(i) *= x(i);
        Vector xc = x;
        return push(std::move(v), [this, p, xc](NodeId o) {
            Matrix g = grad_of(o);
            for (Eigen::Index i = 0; i < g.rows(); ++i) g.row(i) *= xc(i);
            add_grad(p, g);
        });
    }

    NodeId softmax_rows(NodeId a) {
        const Matrix& s = value(a);
        Matrix v(s.rows(), s.cols());
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            double mx = s.row(r).maxCoeff();
            Eigen::RowVectorXd e = (s.row(r).array() - mx).exp();
            v.row(r) = e / e.sum();
        }
        NodeId out = push(std::move(v), [this, a](NodeId o) {
            const Matrix& p = value(o);
            const Matrix& g = grad_of(o);
            Matrix ga(p.rows(), p.cols());
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                double dot = g.row(r).dot(p.row(r));
                ga.row(r) = p.row(r).cwiseProduct((g.row(r).array() - dot).matrix());
            }
            add_grad(a, ga);
        });
        return out;
    }

    NodeId mean_rows(NodeId a) {  // t x w -> 1 x w
        Matrix v = value(a).colwise().mean();
        auto t = static_cast<double>(value(a).rows());
        return push(std::move(v), [this, a, t](NodeId o) {
            add_grad(a, grad_of(o).replicate(static_cast<Eigen::Index>(t), 1) / t);
        });
    }

    NodeId transpose(NodeId a) {
        Matrix v = value(a).transpose();
        return push(std::move(v), [this, a](NodeId o) { add_grad(a, grad_of(o).transpose()); });
    }

    NodeId concat_cols(const std::vector<NodeId>& parts) {
        Eigen::Index rows = value(parts[0]).rows(), cols = 0;
        for (NodeId p : parts) cols += value(p).cols();
        Matrix v(rows, cols);
        Eigen::Index off = 0;
        for (NodeId p : parts) {
            v.middleCols(off, value(p).cols()) = value(p);
            off += value(p).cols();
        }
        std::vector<NodeId> ps = parts;
        return push(std::move(v), [this, ps](NodeId o) {
            Eigen::Index off2 = 0;
            for (NodeId p : ps) {
                add_grad(p, grad_of(o).middleCols(off2, value(p).cols()));
                off2 += value(p).cols();
            }
        });
    }

    NodeId vstack(const std::vector<NodeId>& rows) {  // each 1 x w
        Matrix v(static_cast<Eigen::Index>(rows.size()), value(rows[0]).cols());
        for (std::size_t i = 0; i < rows.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = value(rows[i]);
        std::vector<NodeId> rs = rows;
        return push(std::move(v), [this, rs](NodeId o) {
            for (std::size_t i = 0; i < rs.size(); ++i)
                add_grad(rs[i], grad_of(o).row(static_cast<Eigen::Index>(i)));
        });
    }

    // mean cross-entropy of softmax(logits) against integer labels; returns
    // scalar node. Probabilities are exposed via softmax_rows if needed.
    NodeId softmax_cross_entropy(NodeId logits, const std::vector<int>& labels) {
        const Matrix& s = value(logits);
        Matrix p(s.rows(), s.cols());
        for (Eigen::Index r = 0; r < s.rows(); ++r) {
            double mx = s.row(r).maxCoeff();
            Eigen::RowVectorXd e = (s.row(r).array() - mx).exp();
            p.row(r) = e / e.sum();
        }
        auto n = static_cast<double>(s.rows());
        double loss = 0.0;
        for (Eigen::Index r = 0; r < s.rows(); ++r)
            loss -= std::log(std::max(p(r, labels[static_cast<std::size_t>(r)]), 1e-300));
        Matrix lv(1, 1);
        lv(0, 0) = loss / n;
        Matrix pc = p;
        std::vector<int> lc = labels;
        return push(std::move(lv), [this, logits, pc, lc, n](NodeId o) {
            double g = grad_of(o)(0, 0);
            Matrix d = pc;
            for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, lc[static_cast<std::size_t>(r)]) -= 1.0;
            add_grad(logits, d * (g / n));
        });
    }

    void backward(NodeId loss) {
        for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
        nodes_[static_cast<std::size_t>(loss)].grad.setConstant(1.0);
        for (int i = loss; i >= 0; --i) {
            auto& n = nodes_[static_cast<std::size_t>(i)];
            if (n.backward && n.grad.size() > 0) n.backward(i);
        }
    }

private:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void(NodeId)> backward;
    };

    const Matrix& grad_of(NodeId id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    void add_grad(NodeId id, const Matrix& g) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
        n.grad += g;
    }

    NodeId push(Matrix v, std::function<void(NodeId)> back) {
        nodes_.push_back({std::move(v), Matrix(), std::move(back)});
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    std::vector<Node> nodes_;
};

}  // namespace cropml::nn
