#include "gmf/memory_flow.hpp"

#include <cmath>
#include <stdexcept>

namespace gmf {

namespace {

Vec softmax(const Vec& z) {
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    Vec p(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

Vec read_memory(const ModelParams& params, const Vec& x, const MemoryState& memory,
                std::vector<Vec>* attention_out) {
    int d = params.config.dim;
    int h = params.config.heads;
    int dh = params.head_dim();
    if (static_cast<int>(x.size()) != d) throw std::runtime_error("read_memory: bad x dim");
    Vec readout(d, 0.0);
    if (attention_out) attention_out->assign(h, Vec{});
    if (memory.size() == 0) return readout;

    for (int i = 0; i < h; ++i) {
        Vec q = matvec(params.w_query[i], x);
        Vec logits(memory.size());
        for (std::size_t k = 0; k < memory.size(); ++k) {
            logits[k] = dot(q, matvec(params.w_key[i], memory.slots[k]));
        }
        Vec p = softmax(logits);
        for (std::size_t k = 0; k < memory.size(); ++k) {
            Vec v = matvec(params.w_value[i], memory.slots[k]);
            for (int c = 0; c < dh; ++c) readout[i * dh + c] += p[k] * v[c];
        }
        if (attention_out) (*attention_out)[i] = std::move(p);
    }
    return readout;
}

double score_paragraph(const ModelParams& params, const Vec& x, const Vec& readout,
                       Vec* hidden_out) {
    Vec pre = matvec(params.w_out, readout);
    Vec from_x = matvec(params.w_input, x);
    Vec hidden(pre.size());
    for (std::size_t c = 0; c < pre.size(); ++c) hidden[c] = std::tanh(pre[c] + from_x[c]);
    double s = sigmoid(dot(params.w_score, hidden));
    if (hidden_out) *hidden_out = std::move(hidden);
    return s;
}

void write_memory(MemoryState& memory, const Vec& x, double score, double gate,
                  bool gate_enabled) {
    if (gate_enabled && score < gate) return;
    memory.slots.push_back(x);
}

EpisodeTrace run_episode(const ModelParams& params, const TokenVocab& vocab,
                         const std::string& question,
                         const std::vector<const Paragraph*>& paragraphs, double gate,
                         bool gate_enabled, MemoryState* carry) {
    MemoryState local;
    MemoryState& memory = carry ? *carry : local;
    EpisodeTrace trace;
    trace.slots.assign(memory.slots.begin(), memory.slots.end());
    trace.slot_writer.assign(memory.slots.size(), -1);  // carried in from a prior chunk
    int h = params.config.heads;
    int dh = params.head_dim();
    for (std::size_t t = 0; t < paragraphs.size(); ++t) {
        StepTape tape;
        tape.encoding = encode(params, vocab, question, *paragraphs[t], params.config.max_len);
        tape.visible_slots = memory.size();
        tape.head_query.reserve(h);
        for (int i = 0; i < h; ++i) {
            tape.head_query.push_back(matvec(params.w_query[i], tape.encoding.x));
        }
        tape.readout = read_memory(params, tape.encoding.x, memory, &tape.attention);
        tape.score = score_paragraph(params, tape.encoding.x, tape.readout, &tape.hidden);
        tape.logit = dot(params.w_score, tape.hidden);
        (void)dh;
        std::size_t before = memory.size();
        write_memory(memory, tape.encoding.x, tape.score, gate, gate_enabled);
        tape.written = memory.size() > before;
        if (tape.written) {
            trace.slots.push_back(tape.encoding.x);
            trace.slot_writer.push_back(static_cast<int>(t));
        }
        trace.steps.push_back(std::move(tape));
    }
    return trace;
}

std::vector<ScoredParagraph> process_sequence(const ModelParams& params,
                                              const TokenVocab& vocab,
                                              const std::string& question,
                                              const std::vector<const Paragraph*>& paragraphs,
                                              double gate, bool gate_enabled) {
    if (paragraphs.empty()) throw std::runtime_error("process_sequence: empty input");
    EpisodeTrace trace = run_episode(params, vocab, question, paragraphs, gate, gate_enabled);
    std::vector<ScoredParagraph> out;
    out.reserve(paragraphs.size());
    for (std::size_t t = 0; t < paragraphs.size(); ++t) {
        const StepTape& tape = trace.steps[t];
        out.push_back({paragraphs[t]->id, tape.score, tape.written, tape.attention});
    }
    return out;
}

double bce_loss(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw std::runtime_error("bce_loss: length mismatch");
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        loss -= labels[i] ? std::log(scores[i]) : std::log(1.0 - scores[i]);
    }
    return loss;
}

double episode_backward(const ModelParams& params, const EpisodeTrace& trace,
                        const std::vector<int>& labels, ModelParams& grad,
                        bool through_memory) {
    if (labels.size() != trace.steps.size()) {
        throw std::runtime_error("episode_backward: label length mismatch");
    }
    int d = params.config.dim;
    int h = params.config.heads;
    int dh = params.head_dim();
    double loss = 0.0;
    std::vector<Vec> d_slot(trace.slots.size(), Vec(d, 0.0));

    for (std::size_t t = trace.steps.size(); t-- > 0;) {
        const StepTape& tape = trace.steps[t];
        double y = static_cast<double>(labels[t]);
        // softplus form of the BCE term, stable when the sigmoid saturates
        double z = labels[t] ? -tape.logit : tape.logit;
        loss += z > 30.0 ? z : std::log1p(std::exp(z));

        // score head: s = sigmoid(w_score . hidden)
        double d_logit = tape.score - y;
        Vec d_hidden(d);
        for (int c = 0; c < d; ++c) {
            grad.w_score[c] += d_logit * tape.hidden[c];
            d_hidden[c] = d_logit * params.w_score[c];
        }
        Vec d_pre(d);
        for (int c = 0; c < d; ++c) {
            d_pre[c] = d_hidden[c] * (1.0 - tape.hidden[c] * tape.hidden[c]);
        }
        add_outer(grad.w_out, d_pre, tape.readout);
        add_outer(grad.w_input, d_pre, tape.encoding.x);
        Vec d_readout = matvec_t(params.w_out, d_pre);
        Vec d_x = matvec_t(params.w_input, d_pre);

        // readout: per head, softmax attention over the visible slot prefix
        std::size_t lm = tape.visible_slots;
        for (int i = 0; i < h && lm > 0; ++i) {
            Vec d_head(d_readout.begin() + i * dh, d_readout.begin() + (i + 1) * dh);
            const Vec& p = tape.attention[i];
            const Vec& q = tape.head_query[i];
            Vec d_p(lm);
            for (std::size_t k = 0; k < lm; ++k) {
                const Vec& slot = trace.slots[k];
                Vec v = matvec(params.w_value[i], slot);
                d_p[k] = dot(d_head, v);
                Vec pd(d_head);
                for (double& e : pd) e *= p[k];
                add_outer(grad.w_value[i], pd, slot);
                if (through_memory) axpy(d_slot[k], 1.0, matvec_t(params.w_value[i], pd));
            }
            double mean = 0.0;
            for (std::size_t k = 0; k < lm; ++k) mean += p[k] * d_p[k];
            Vec d_q(dh, 0.0);
            for (std::size_t k = 0; k < lm; ++k) {
                double d_z = p[k] * (d_p[k] - mean);
                const Vec& slot = trace.slots[k];
                Vec key = matvec(params.w_key[i], slot);
                axpy(d_q, d_z, key);
                Vec d_key(q);
                for (double& e : d_key) e *= d_z;
                add_outer(grad.w_key[i], d_key, slot);
                if (through_memory) axpy(d_slot[k], 1.0, matvec_t(params.w_key[i], d_key));
            }
            add_outer(grad.w_query[i], d_q, tape.encoding.x);
            axpy(d_x, 1.0, matvec_t(params.w_query[i], d_q));
        }

        if (through_memory && tape.written) {
            // this step's x became a slot read by later steps
            for (std::size_t j = 0; j < trace.slots.size(); ++j) {
                if (trace.slot_writer[j] == static_cast<int>(t)) {
                    axpy(d_x, 1.0, d_slot[j]);
                    break;
                }
            }
        }

        encode_backward_into(params, tape.encoding, d_x, grad);
    }
    return loss;
}

}  // namespace gmf
