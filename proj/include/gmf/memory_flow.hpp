#pragma once

#include <string>
#include <vector>

#include "gmf/model.hpp"

namespace gmf {

// Cross-paragraph state for one question episode. Keys and values coincide,
// so a slot is a single d-vector. Append-only.
struct MemoryState {
    std::vector<Vec> slots;
    std::size_t size() const { return slots.size(); }
};

inline MemoryState init_memory() { return {}; }

// Eq-level pieces. Dot-product logits are unscaled; empty memory reads zero.
Vec read_memory(const ModelParams& params, const Vec& x, const MemoryState& memory,
                std::vector<Vec>* attention_out = nullptr);
double score_paragraph(const ModelParams& params, const Vec& x, const Vec& readout,
                       Vec* hidden_out = nullptr);
void write_memory(MemoryState& memory, const Vec& x, double score, double gate,
                  bool gate_enabled);

struct ScoredParagraph {
    std::string pid;
    double score = 0.0;
    bool written = false;
    std::vector<Vec> attention;  // per head, over the slots visible at read time
};

// Everything the backward pass needs about one time step.
struct StepTape {
    Encoding encoding;
    std::size_t visible_slots = 0;  // l_m at read time
    std::vector<Vec> head_query;    // h x (d/h)
    std::vector<Vec> attention;     // h x visible_slots
    Vec readout;                    // o_t
    Vec hidden;                     // h_t
    double logit = 0.0;             // w_score . h_t
    double score = 0.0;
    bool written = false;
};

struct EpisodeTrace {
    std::vector<StepTape> steps;
    std::vector<Vec> slots;          // final memory contents, in write order
    std::vector<int> slot_writer;    // slot index -> step that wrote it
};

EpisodeTrace run_episode(const ModelParams& params, const TokenVocab& vocab,
                         const std::string& question,
                         const std::vector<const Paragraph*>& paragraphs, double gate,
                         bool gate_enabled, MemoryState* carry = nullptr);

std::vector<ScoredParagraph> process_sequence(const ModelParams& params,
                                              const TokenVocab& vocab,
                                              const std::string& question,
                                              const std::vector<const Paragraph*>& paragraphs,
                                              double gate, bool gate_enabled);

// BCE gradient through the whole episode. Write decisions are constants of the
// forward pass. With through_memory=false, stored slots are constants for later
// steps (truncated depth 0); with true, gradients chain through the slot
// contents into the steps that wrote them.
double episode_backward(const ModelParams& params, const EpisodeTrace& trace,
                        const std::vector<int>& labels, ModelParams& grad,
                        bool through_memory);

double bce_loss(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace gmf
