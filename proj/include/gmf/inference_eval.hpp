#pragma once

#include <map>
#include <string>
#include <vector>

#include "gmf/memory_flow.hpp"
#include "gmf/term_retrieval.hpp"

namespace gmf {

// Processes candidates in chunks; memory carries across chunks within one
// question, so chunking is a batching device only.
std::vector<ScoredParagraph> score_candidates_chunked(const ModelParams& params,
                                                      const TokenVocab& vocab,
                                                      const Question& question,
                                                      const std::vector<const Paragraph*>&
                                                          candidates,
                                                      int chunk_size, double gate,
                                                      bool gate_enabled);

struct RetrievalResult {
    std::string qid;
    std::vector<std::pair<std::string, double>> retrieved;  // score descending
    std::size_t candidate_size = 0;
};

// Keep scores strictly above h_d, ties broken by candidate-set position,
// truncated to n_retri.
RetrievalResult select_paragraphs(const std::string& qid,
                                  const std::vector<ScoredParagraph>& scored, int n_retri,
                                  double h_d);

struct QtypeMetrics {
    double pr = 0.0;
    double p_em = 0.0;
    double precision = 0.0;
    std::size_t count = 0;
};

struct MetricsReport {
    double answer_recall = 0.0;       // span-answer questions only
    double paragraph_recall = 0.0;
    double p_em = 0.0;
    double precision = 0.0;           // macro, per-question mean
    double precision_micro = 0.0;
    double candidate_recall = 0.0;    // micro over gold paragraphs
    double candidate_recall_macro = 0.0;
    double mean_retrieved_count = 0.0;
    std::size_t questions = 0;
    std::size_t span_questions = 0;   // AR denominator
    QtypeMetrics bridge;
    QtypeMetrics comparison;
};

MetricsReport evaluate(const std::vector<RetrievalResult>& results,
                       const std::vector<Question>& questions, const CorpusStore& store,
                       const std::vector<CandidateSet>* candidates = nullptr);

std::string render_report_text(const MetricsReport& r);
std::string render_report_json(const MetricsReport& r);
MetricsReport parse_report_json(const std::string& text);

}  // namespace gmf
