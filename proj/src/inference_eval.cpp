#include "gmf/inference_eval.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace gmf {

std::vector<ScoredParagraph> score_candidates_chunked(
    const ModelParams& params, const TokenVocab& vocab, const Question& question,
    const std::vector<const Paragraph*>& candidates, int chunk_size, double gate,
    bool gate_enabled) {
    if (chunk_size < 1) throw std::runtime_error("chunk_size must be >= 1");
    std::vector<ScoredParagraph> out;
    MemoryState memory = init_memory();
    for (std::size_t start = 0; start < candidates.size();
         start += static_cast<std::size_t>(chunk_size)) {
        std::size_t end = std::min(start + static_cast<std::size_t>(chunk_size),
                                   candidates.size());
        std::vector<const Paragraph*> chunk(candidates.begin() + start,
                                            candidates.begin() + end);
        EpisodeTrace trace =
            run_episode(params, vocab, question.text, chunk, gate, gate_enabled, &memory);
        for (std::size_t t = 0; t < chunk.size(); ++t) {
            const StepTape& tape = trace.steps[t];
            out.push_back({chunk[t]->id, tape.score, tape.written, tape.attention});
        }
    }
    return out;
}

RetrievalResult select_paragraphs(const std::string& qid,
                                  const std::vector<ScoredParagraph>& scored, int n_retri,
                                  double h_d) {
    std::vector<std::size_t> order(scored.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return scored[a].score > scored[b].score;  // stable keeps candidate position on ties
    });
    RetrievalResult result;
    result.qid = qid;
    result.candidate_size = scored.size();
    for (std::size_t i : order) {
        if (static_cast<int>(result.retrieved.size()) >= n_retri) break;
        if (scored[i].score <= h_d) continue;
        result.retrieved.emplace_back(scored[i].pid, scored[i].score);
    }
    return result;
}

namespace {

std::string normalize(const std::string& s) {
    std::string out;
    bool pending_space = false;
    for (char ch : s) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            pending_space = !out.empty();
        } else {
            if (pending_space) out.push_back(' ');
            pending_space = false;
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

bool is_yes_no(const std::string& answer) {
    std::string a = normalize(answer);
    return a == "yes" || a == "no";
}

void accumulate_qtype(QtypeMetrics& m, bool pr, bool pem, double precision) {
    ++m.count;
    m.pr += pr ? 1.0 : 0.0;
    m.p_em += pem ? 1.0 : 0.0;
    m.precision += precision;
}

void finish_qtype(QtypeMetrics& m) {
    if (m.count == 0) return;
    double n = static_cast<double>(m.count);
    m.pr /= n;
    m.p_em /= n;
    m.precision /= n;
}

}  // namespace

MetricsReport evaluate(const std::vector<RetrievalResult>& results,
                       const std::vector<Question>& questions, const CorpusStore& store,
                       const std::vector<CandidateSet>* candidates) {
    std::map<std::string, const Question*> q_by_id;
    for (const Question& q : questions) q_by_id[q.id] = &q;
    std::map<std::string, const CandidateSet*> c_by_id;
    if (candidates) {
        for (const CandidateSet& cs : *candidates) c_by_id[cs.qid] = &cs;
    }

    MetricsReport r;
    double ar_hits = 0, pr_hits = 0, pem_hits = 0, precision_sum = 0;
    double micro_inter = 0, micro_retrieved = 0;
    double cand_gold_hits = 0, gold_total = 0, cand_macro_sum = 0;
    double retrieved_total = 0;

    for (const RetrievalResult& res : results) {
        auto it = q_by_id.find(res.qid);
        if (it == q_by_id.end()) {
            throw std::runtime_error("evaluate: no gold record for question " + res.qid);
        }
        const Question& q = *it->second;
        std::set<std::string> gold(q.gold_evidence.begin(), q.gold_evidence.end());
        std::set<std::string> retrieved;
        std::string retrieved_text;
        for (const auto& [pid, score] : res.retrieved) {
            retrieved.insert(pid);
            if (const Paragraph* p = store.find(pid)) {
                retrieved_text += " " + p->title;
                for (const std::string& s : p->sentences) retrieved_text += " " + s;
            }
        }
        std::size_t inter = 0;
        for (const std::string& g : gold) inter += retrieved.count(g);

        bool pr = inter >= 1;
        bool pem = inter == gold.size() && !gold.empty();
        double precision = retrieved.empty()
                               ? 0.0
                               : static_cast<double>(inter) /
                                     static_cast<double>(retrieved.size());
        ++r.questions;
        retrieved_total += static_cast<double>(retrieved.size());
        pr_hits += pr ? 1 : 0;
        pem_hits += pem ? 1 : 0;
        precision_sum += precision;
        micro_inter += static_cast<double>(inter);
        micro_retrieved += static_cast<double>(retrieved.size());

        if (!is_yes_no(q.answer)) {
            ++r.span_questions;
            if (normalize(retrieved_text).find(normalize(q.answer)) != std::string::npos) {
                ++ar_hits;
            }
        }

        accumulate_qtype(q.qtype == QuestionType::bridge ? r.bridge : r.comparison, pr, pem,
                         precision);

        if (candidates) {
            auto cit = c_by_id.find(res.qid);
            std::size_t cand_inter = 0;
            if (cit != c_by_id.end()) {
                for (const std::string& g : gold) {
                    if (cit->second->contains(g)) ++cand_inter;
                }
            }
            cand_gold_hits += static_cast<double>(cand_inter);
            gold_total += static_cast<double>(gold.size());
            if (!gold.empty()) {
                cand_macro_sum +=
                    static_cast<double>(cand_inter) / static_cast<double>(gold.size());
            }
        }
    }

    double n = static_cast<double>(r.questions);
    if (r.questions > 0) {
        r.paragraph_recall = pr_hits / n;
        r.p_em = pem_hits / n;
        r.precision = precision_sum / n;
        r.mean_retrieved_count = retrieved_total / n;
        r.precision_micro = micro_retrieved > 0 ? micro_inter / micro_retrieved : 0.0;
        r.candidate_recall = gold_total > 0 ? cand_gold_hits / gold_total : 0.0;
        r.candidate_recall_macro = cand_macro_sum / n;
    }
    r.answer_recall = r.span_questions > 0
                          ? ar_hits / static_cast<double>(r.span_questions)
                          : 0.0;
    finish_qtype(r.bridge);
    finish_qtype(r.comparison);
    return r;
}

std::string render_report_text(const MetricsReport& r) {
    std::ostringstream out;
    out.precision(4);
    out << std::fixed;
    out << "questions            " << r.questions << "\n";
    out << "answer_recall        " << r.answer_recall << "  (over " << r.span_questions
        << " span-answer questions; yes/no excluded)\n";
    out << "paragraph_recall     " << r.paragraph_recall << "\n";
    out << "p_em                 " << r.p_em << "\n";
    out << "precision            " << r.precision << "  (macro; micro "
        << r.precision_micro << ")\n";
    out << "candidate_recall     " << r.candidate_recall << "  (micro; macro "
        << r.candidate_recall_macro << ")\n";
    out << "mean_retrieved_count " << r.mean_retrieved_count;
    if (r.mean_retrieved_count < 4.0 && r.questions > 0) out << "  (< 4 per question)";
    out << "\n";
    out << "bridge      n=" << r.bridge.count << " pr=" << r.bridge.pr
        << " p_em=" << r.bridge.p_em << " precision=" << r.bridge.precision << "\n";
    out << "comparison  n=" << r.comparison.count << " pr=" << r.comparison.pr
        << " p_em=" << r.comparison.p_em << " precision=" << r.comparison.precision << "\n";
    return out.str();
}

namespace {

json qtype_json(const QtypeMetrics& m) {
    return {{"count", m.count}, {"pr", m.pr}, {"p_em", m.p_em}, {"precision", m.precision}};
}

QtypeMetrics qtype_from_json(const json& j) {
    QtypeMetrics m;
    m.count = j.at("count").get<std::size_t>();
    m.pr = j.at("pr").get<double>();
    m.p_em = j.at("p_em").get<double>();
    m.precision = j.at("precision").get<double>();
    return m;
}

}  // namespace

std::string render_report_json(const MetricsReport& r) {
    json j{{"questions", r.questions},
           {"span_questions", r.span_questions},
           {"answer_recall", r.answer_recall},
           {"paragraph_recall", r.paragraph_recall},
           {"p_em", r.p_em},
           {"precision", r.precision},
           {"precision_micro", r.precision_micro},
           {"candidate_recall", r.candidate_recall},
           {"candidate_recall_macro", r.candidate_recall_macro},
           {"mean_retrieved_count", r.mean_retrieved_count},
           {"bridge", qtype_json(r.bridge)},
           {"comparison", qtype_json(r.comparison)}};
    return j.dump(2);
}

MetricsReport parse_report_json(const std::string& text) {
    json j = json::parse(text);
    MetricsReport r;
    r.questions = j.at("questions").get<std::size_t>();
    r.span_questions = j.at("span_questions").get<std::size_t>();
    r.answer_recall = j.at("answer_recall").get<double>();
    r.paragraph_recall = j.at("paragraph_recall").get<double>();
    r.p_em = j.at("p_em").get<double>();
    r.precision = j.at("precision").get<double>();
    r.precision_micro = j.at("precision_micro").get<double>();
    r.candidate_recall = j.at("candidate_recall").get<double>();
    r.candidate_recall_macro = j.at("candidate_recall_macro").get<double>();
    r.mean_retrieved_count = j.at("mean_retrieved_count").get<double>();
    r.bridge = qtype_from_json(j.at("bridge"));
    r.comparison = qtype_from_json(j.at("comparison"));
    return r;
}

}  // namespace gmf
