#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cropml/dataset.hpp"
#include "cropml/model.hpp"
#include "cropml/nn/autograd.hpp"

namespace cropml::nn {

// Free-standing scaled dot-product attention: softmax(Q K^T / sqrt(h)).
inline Matrix attention_scores(const Matrix& query, const Matrix& key) {
    if (query.cols() != key.cols()) throw DimensionMismatch("attention: inner width mismatch");
    Matrix s = query * key.transpose() / std::sqrt(static_cast<double>(query.cols()));
    return softmax_rows(s);
}

struct ArchitectureSpec {
    std::string variant = "deep";  // deep | residual | self_attention | feature_pyramid
    int input_dim = 0;
    int class_count = 0;
    double dropout_rate = 0.0;
    std::uint64_t seed = 0;

    // variant knobs (defaults mirror the shipped architectures)
    std::vector<int> deep_widths = {256, 128, 64};
    int residual_width = 128;
    int residual_blocks = 3;
    int attention_embed = 32;
    int attention_head_hidden = 64;
    std::vector<int> pyramid_widths = {256, 128, 64};

    void validate() const {
        if (input_dim <= 0 || class_count < 2) throw InvalidSpec("input_dim/class_count");
        if (dropout_rate < 0.0 || dropout_rate >= 1.0) throw InvalidSpec("dropout_rate in [0,1)");
        if (variant != "deep" && variant != "residual" && variant != "self_attention" &&
            variant != "feature_pyramid")
            throw InvalidSpec("unknown variant: " + variant);
        for (int w : deep_widths)
            if (w <= 0) throw InvalidSpec("layer width");
        for (int w : pyramid_widths)
            if (w <= 0) throw InvalidSpec("layer width");
    }
};

inline void to_json(nlohmann::json& j, const ArchitectureSpec& s) {
    j = {{"variant", s.variant},
         {"input_dim", s.input_dim},
         {"class_count", s.class_count},
         {"dropout_rate", s.dropout_rate},
         {"seed", s.seed},
         {"deep_widths", s.deep_widths},
         {"residual_width", s.residual_width},
         {"residual_blocks", s.residual_blocks},
         {"attention_embed", s.attention_embed},
         {"attention_head_hidden", s.attention_head_hidden},
         {"pyramid_widths", s.pyramid_widths}};
}

inline void from_json(const nlohmann::json& j, ArchitectureSpec& s) {
    j.at("variant").get_to(s.variant);
    j.at("input_dim").get_to(s.input_dim);
    j.at("class_count").get_to(s.class_count);
    j.at("dropout_rate").get_to(s.dropout_rate);
    j.at("seed").get_to(s.seed);
    j.at("deep_widths").get_to(s.deep_widths);
    j.at("residual_width").get_to(s.residual_width);
    j.at("residual_blocks").get_to(s.residual_blocks);
    j.at("attention_embed").get_to(s.attention_embed);
    j.at("attention_head_hidden").get_to(s.attention_head_hidden);
    j.at("pyramid_widths").get_to(s.pyramid_widths);
}

using ParamStore = std::map<std::string, Matrix>;  // ordered: deterministic walks

class Network {
public:
    ArchitectureSpec spec;
    ParamStore params;

    static Network build(const ArchitectureSpec& spec_in) {
        spec_in.validate();
        Network net;
        net.spec = spec_in;
        int d = spec_in.input_dim, K = spec_in.class_count;
        std::uint64_t idx = 0;
        auto add = [&](const std::string& name, int rows, int cols, bool zero = false) {
            Matrix m(rows, cols);
            if (zero) {
                m.setZero();
            } else {
                // scaled-uniform fan-in init
                double bound = 1.0 / std::sqrt(static_cast<double>(rows));
                Rng rng(derive_seed(spec_in.seed, 0x1417 + idx));
                for (Eigen::Index r = 0; r < m.rows(); ++r)
                    for (Eigen::Index c = 0; c < m.cols(); ++c)
                        m(r, c) = (2.0 * rng.next_double() - 1.0) * bound;
            }
            ++idx;
            net.params[name] = std::move(m);
        };

        const auto& s = spec_in;
        if (s.variant == "deep") {
            int in = d;
            for (std::size_t l = 0; l < s.deep_widths.size(); ++l) {
                add("W" + std::to_string(l), in, s.deep_widths[l]);
                add("b" + std::to_string(l), 1, s.deep_widths[l], true);
                in = s.deep_widths[l];
            }
            add("W_out", in, K);
            add("b_out", 1, K, true);
        } else if (s.variant == "residual") {
            add("W_in", d, s.residual_width);
            add("b_in", 1, s.residual_width, true);
            for (int blk = 0; blk < s.residual_blocks; ++blk) {
                std::string p = "blk" + std::to_string(blk) + "_";
                add(p + "W1", s.residual_width, s.residual_width);
                add(p + "b1", 1, s.residual_width, true);
                add(p + "W2", s.residual_width, s.residual_width);
                add(p + "b2", 1, s.residual_width, true);
            }
            add("W_out", s.residual_width, K);
            add("b_out", 1, K, true);
        } else if (s.variant == "self_attention") {
            int e = s.attention_embed;
            add("embed_scale", d, e);
            add("embed_bias", d, e, true);
            add("embed_pos", d, e);
            add("Wq", e, e);
            add("Wk", e, e);
            add("Wv", e, e);
            add("W_h", e, s.attention_head_hidden);
            add("b_h", 1, s.attention_head_hidden, true);
            add("W_out", s.attention_head_hidden, K);
            add("b_out", 1, K, true);
        } else {  // feature_pyramid
            for (std::size_t b = 0; b < s.pyramid_widths.size(); ++b) {
                add("Wb" + std::to_string(b), d, s.pyramid_widths[b]);
                add("bb" + std::to_string(b), 1, s.pyramid_widths[b], true);
            }
            // top-down projections: coarser width -> next finer width
            for (std::size_t b = s.pyramid_widths.size() - 1; b > 0; --b)
                add("P" + std::to_string(b), s.pyramid_widths[b], s.pyramid_widths[b - 1]);
            int total = 0;
            for (int w : s.pyramid_widths) total += w;
            add("W_out", total, K);
            add("b_out", 1, K, true);
        }
        return net;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [name, m] : params) n += static_cast<std::size_t>(m.size());
        return n;
    }

    // Builds the forward graph; returns the logits node. leaf_ids receives
    // the tape id of every parameter so callers can read gradients back.
    Tape::NodeId forward_graph(Tape& tape, const Matrix& X, bool train, Rng* dropout_rng,
                               std::map<std::string, Tape::NodeId>& leaf_ids) const {
        if (X.cols() != spec.input_dim) throw DimensionMismatch("network: batch width");
        leaf_ids.clear();
        for (const auto& [name, m] : params) leaf_ids[name] = tape.leaf(m);
        auto P = [&](const std::string& n) { return leaf_ids.at(n); };

        auto maybe_dropout = [&](Tape::NodeId h) {
            if (!train || spec.dropout_rate <= 0.0 || dropout_rng == nullptr) return h;
            const Matrix& v = tape.value(h);
            Matrix mask(v.rows(), v.cols());
            double keep = 1.0 - spec.dropout_rate;
            for (Eigen::Index r = 0; r < mask.rows(); ++r)
                for (Eigen::Index c = 0; c < mask.cols(); ++c)
                    mask(r, c) = (dropout_rng->next_double() < keep) ? 1.0 / keep : 0.0;
            return tape.dropout(h, mask);
        };

        Tape::NodeId x = tape.constant(X);
        const auto& s = spec;

        if (s.variant == "deep") {
            Tape::NodeId h = x;
            for (std::size_t l = 0; l < s.deep_widths.size(); ++l) {
                h = tape.add_bias(tape.matmul(h, P("W" + std::to_string(l))),
                                  P("b" + std::to_string(l)));
                h = tape.relu(h);
                h = maybe_dropout(h);
            }
            return tape.add_bias(tape.matmul(h, P("W_out")), P("b_out"));
        }

        if (s.variant == "residual") {
            Tape::NodeId h = tape.add_bias(tape.matmul(x, P("W_in")), P("b_in"));
            for (int blk = 0; blk < s.residual_blocks; ++blk) {
                std::string p = "blk" + std::to_string(blk) + "_";
                Tape::NodeId inner =
                    tape.relu(tape.add_bias(tape.matmul(h, P(p + "W1")), P(p + "b1")));
                Tape::NodeId out =
                    tape.add(h, tape.add_bias(tape.matmul(inner, P(p + "W2")), P(p + "b2")));
                h = (blk + 1 < s.residual_blocks) ? tape.relu(out) : out;
            }
            return tape.add_bias(tape.matmul(h, P("W_out")), P("b_out"));
        }

        if (s.variant == "self_attention") {
            double scale = 1.0 / std::sqrt(static_cast<double>(s.attention_embed));
            std::vector<Tape::NodeId> pooled_rows;
            for (Eigen::Index i = 0; i < X.rows(); ++i) {
                Vector xi = X.row(i).transpose();
                Tape::NodeId tok = tape.add(
                    tape.add(tape.row_scale(P("embed_scale"), xi), P("embed_bias")),
                    P("embed_pos"));  // d x e
                Tape::NodeId Q = tape.matmul(tok, P("Wq"));
                Tape::NodeId Kq = tape.matmul(tok, P("Wk"));
                Tape::NodeId V = tape.matmul(tok, P("Wv"));
                Tape::NodeId A =
                    tape.softmax_rows(tape.scale(tape.matmul(Q, tape.transpose(Kq)), scale));
                Tape::NodeId O = tape.matmul(A, V);
                pooled_rows.push_back(tape.mean_rows(O));
            }
            Tape::NodeId pooled = tape.vstack(pooled_rows);  // m x e
            Tape::NodeId h = tape.relu(tape.add_bias(tape.matmul(pooled, P("W_h")), P("b_h")));
            h = maybe_dropout(h);
            return tape.add_bias(tape.matmul(h, P("W_out")), P("b_out"));
        }

        // feature_pyramid
        std::vector<Tape::NodeId> branches;
        for (std::size_t b = 0; b < s.pyramid_widths.size(); ++b) {
            branches.push_back(tape.relu(tape.add_bias(
                tape.matmul(x, P("Wb" + std::to_string(b))), P("bb" + std::to_string(b)))));
        }
        // top-down fusion: coarsest branch projected and added into finer ones
        std::vector<Tape::NodeId> fused(branches.size());
        fused.back() = branches.back();
        for (std::size_t b = branches.size() - 1; b > 0; --b)
            fused[b - 1] =
                tape.add(branches[b - 1], tape.matmul(fused[b], P("P" + std::to_string(b))));
        Tape::NodeId cat = tape.concat_cols(fused);
        return tape.add_bias(tape.matmul(cat, P("W_out")), P("b_out"));
    }

    // eval-mode probabilities (dropout off, deterministic)
    Matrix forward(const Matrix& X, bool train = false, Rng* dropout_rng = nullptr) const {
        Tape tape;
        std::map<std::string, Tape::NodeId> leaves;
        Tape::NodeId logits = forward_graph(tape, X, train, dropout_rng, leaves);
        return softmax_rows(tape.value(logits));
    }

    // mean cross-entropy loss + parameter gradients for one batch
    double loss_and_grads(const Matrix& X, const std::vector<int>& labels, bool train,
                          Rng* dropout_rng, ParamStore& grads) const {
        Tape tape;
        std::map<std::string, Tape::NodeId> leaves;
        Tape::NodeId logits = forward_graph(tape, X, train, dropout_rng, leaves);
        Tape::NodeId loss = tape.softmax_cross_entropy(logits, labels);
        tape.backward(loss);
        grads.clear();
        for (const auto& [name, id] : leaves) grads[name] = tape.grad(id);
        double l = tape.value(loss)(0, 0);
        if (!std::isfinite(l)) throw NonFinite("network loss");
        return l;
    }

    nlohmann::json to_json() const {
        nlohmann::json t = nlohmann::json::object();
        for (const auto& [name, m] : params) t[name] = matrix_to_json(m);
        return {{"spec", spec}, {"tensors", t}};
    }

    static Network from_json(const nlohmann::json& j) {
        Network net;
        net.spec = j.at("spec").get<ArchitectureSpec>();
        for (const auto& [name, m] : j.at("tensors").items())
            net.params[name] = matrix_from_json(m);
        return net;
    }
};

// Residual block in isolation: x + W2 relu(x W1 + b1) + b2.
inline Matrix residual_block_forward(const Matrix& x, const Matrix& W1, const Matrix& b1,
                                     const Matrix& W2, const Matrix& b2) {
    Matrix inner = ((x * W1).rowwise() + b1.row(0)).cwiseMax(0.0);
    return x + ((inner * W2).rowwise() + b2.row(0));
}

// Model adapter so networks flow through metrics/explainability unchanged.
class NetworkModel : public Model {
public:
    Network net;

    explicit NetworkModel(Network n) : net(std::move(n)) {}

    std::string family() const override { return "nn_" + net.spec.variant; }
    int class_count() const override { return net.spec.class_count; }
    Matrix predict_proba(const Matrix& X) const override { return net.forward(X); }
    nlohmann::json to_json() const override {
        nlohmann::json j = net.to_json();
        j["family"] = family();
        return j;
    }
};

}  // namespace cropml::nn
