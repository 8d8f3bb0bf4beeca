#include "gmf/term_retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

using nlohmann::json;

namespace gmf {

std::vector<std::string> tokenize_unigrams(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out = tokenize_unigrams(text);
    std::size_t n = out.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
        out.push_back(out[i] + "_" + out[i + 1]);
    }
    return out;
}

namespace {

std::string paragraph_text(const Paragraph& p) {
    std::string text = p.title;
    for (const std::string& s : p.sentences) {
        text += " ";
        text += s;
    }
    return text;
}

}  // namespace

InvertedIndex build_index(const CorpusStore& store) {
    if (store.size() == 0) throw std::runtime_error("cannot index an empty corpus");
    InvertedIndex index;
    index.doc_count = store.size();
    for (const Paragraph& p : store.paragraphs()) {
        std::map<int, int>& tf = index.doc_terms[p.id];
        for (const std::string& term : tokenize(paragraph_text(p))) {
            auto [it, inserted] = index.vocab.try_emplace(
                term, static_cast<int>(index.vocab.size()));
            if (inserted) {
                index.postings.emplace_back();
                index.doc_freq.push_back(0);
            }
            ++tf[it->second];
        }
    }
    // Paragraphs arrive in file order; postings want pid order.
    for (const auto& [pid, tf] : index.doc_terms) {
        for (const auto& [tid, count] : tf) {
            index.postings[tid].emplace_back(pid, count);
            ++index.doc_freq[tid];
        }
    }
    return index;
}

void save_index(const InvertedIndex& index, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write index file: " + path);
    json header{{"format", "gmf-index"}, {"version", 1}, {"doc_count", index.doc_count}};
    out << header.dump() << "\n";
    for (const auto& [term, tid] : index.vocab) {
        json j{{"term", term}, {"id", tid}, {"df", index.doc_freq[tid]}};
        out << j.dump() << "\n";
    }
    json sep{{"section", "docs"}};
    out << sep.dump() << "\n";
    for (const auto& [pid, tf] : index.doc_terms) {
        json terms = json::array();
        for (const auto& [tid, count] : tf) terms.push_back({tid, count});
        json j{{"pid", pid}, {"tf", terms}};
        out << j.dump() << "\n";
    }
}

InvertedIndex load_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open index file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty index file: " + path);
    json header = json::parse(line);
    if (header.value("format", "") != "gmf-index" || header.value("version", 0) != 1) {
        throw std::runtime_error("unsupported index format in " + path);
    }
    InvertedIndex index;
    index.doc_count = header.at("doc_count").get<std::size_t>();
    bool in_docs = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.contains("section")) {
            in_docs = true;
            continue;
        }
        if (!in_docs) {
            int tid = j.at("id").get<int>();
            index.vocab[j.at("term").get<std::string>()] = tid;
            if (index.doc_freq.size() <= static_cast<std::size_t>(tid)) {
                index.doc_freq.resize(tid + 1, 0);
                index.postings.resize(tid + 1);
            }
            index.doc_freq[tid] = j.at("df").get<int>();
        } else {
            std::string pid = j.at("pid").get<std::string>();
            std::map<int, int>& tf = index.doc_terms[pid];
            for (const auto& pair : j.at("tf")) {
                tf[pair[0].get<int>()] = pair[1].get<int>();
            }
        }
    }
    for (const auto& [pid, tf] : index.doc_terms) {
        for (const auto& [tid, count] : tf) {
            index.postings[tid].emplace_back(pid, count);
        }
    }
    return index;
}

namespace {

double idf(const InvertedIndex& index, int tid) {
    double n = static_cast<double>(index.doc_count);
    double df = static_cast<double>(index.doc_freq[tid]);
    return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
}

std::map<int, int> question_tf(const std::vector<std::string>& terms,
                               const InvertedIndex& index) {
    std::map<int, int> tf;
    for (const std::string& t : terms) {
        int tid = index.term_id(t);
        if (tid >= 0) ++tf[tid];
    }
    return tf;
}

}  // namespace

double tfidf_score(const std::vector<std::string>& question_terms, const std::string& pid,
                   const InvertedIndex& index) {
    auto doc_it = index.doc_terms.find(pid);
    if (doc_it == index.doc_terms.end()) {
        throw std::runtime_error("tfidf_score: paragraph not indexed: " + pid);
    }
    const std::map<int, int>& doc_tf = doc_it->second;
    double score = 0.0;
    for (const auto& [tid, qtf] : question_tf(question_terms, index)) {
        auto it = doc_tf.find(tid);
        if (it == doc_tf.end()) continue;
        double w = idf(index, tid);
        score += std::log1p(static_cast<double>(qtf)) * w *
                 std::log1p(static_cast<double>(it->second)) * w;
    }
    return score;
}

namespace {

std::vector<std::string> rank_by_score(std::vector<std::pair<double, std::string>> scored,
                                       int limit) {
    std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    std::vector<std::string> out;
    for (const auto& [score, pid] : scored) {
        if (static_cast<int>(out.size()) >= limit) break;
        out.push_back(pid);
    }
    return out;
}

bool is_contiguous_subsequence(const std::vector<std::string>& needle,
                               const std::vector<std::string>& haystack) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        if (std::equal(needle.begin(), needle.end(), haystack.begin() + i)) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> retrieve_kwm(const Question& q, const InvertedIndex& index,
                                      const CorpusStore& store, int n_kwm) {
    std::vector<std::string> q_unigrams = tokenize_unigrams(q.text);
    std::vector<std::string> q_terms = tokenize(q.text);
    std::vector<std::pair<double, std::string>> matched;
    for (const Paragraph& p : store.paragraphs()) {
        std::vector<std::string> title_tokens = tokenize_unigrams(p.title);
        if (!is_contiguous_subsequence(title_tokens, q_unigrams)) continue;
        matched.emplace_back(tfidf_score(q_terms, p.id, index), p.id);
    }
    return rank_by_score(std::move(matched), n_kwm);
}

std::vector<std::string> retrieve_tfidf(const Question& q, const InvertedIndex& index,
                                        int n_tfidf) {
    std::vector<std::string> q_terms = tokenize(q.text);
    std::vector<std::pair<double, std::string>> scored;
    for (const auto& [pid, tf] : index.doc_terms) {
        double s = tfidf_score(q_terms, pid, index);
        if (s > 0.0) scored.emplace_back(s, pid);
    }
    return rank_by_score(std::move(scored), n_tfidf);
}

std::vector<std::string> expand_hyperlinks(const std::vector<std::string>& seeds,
                                           const HyperlinkGraph& graph, bool forward_only) {
    std::set<std::string> seed_set(seeds.begin(), seeds.end());
    std::set<std::string> emitted;
    std::set<std::string> seen_seed;
    std::vector<std::string> out;
    auto emit = [&](const std::set<std::string>& ids) {
        for (const std::string& id : ids) {
            if (seed_set.count(id)) continue;
            if (emitted.insert(id).second) out.push_back(id);
        }
    };
    for (const std::string& seed : seeds) {
        if (!seen_seed.insert(seed).second) continue;  // duplicate seeds are harmless
        if (auto it = graph.out_edges.find(seed); it != graph.out_edges.end()) {
            emit(it->second);
        }
        if (!forward_only) {
            if (auto it = graph.in_edges.find(seed); it != graph.in_edges.end()) {
                emit(it->second);
            }
        }
    }
    return out;
}

std::string to_string(CandidateSource s) {
    switch (s) {
        case CandidateSource::kwm: return "kwm";
        case CandidateSource::tfidf: return "tfidf";
        case CandidateSource::hyperlink: return "hyperlink";
    }
    return "?";
}

std::vector<std::string> CandidateSet::ids() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const CandidateEntry& e : entries) out.push_back(e.pid);
    return out;
}

bool CandidateSet::contains(const std::string& pid) const {
    return std::any_of(entries.begin(), entries.end(),
                       [&](const CandidateEntry& e) { return e.pid == pid; });
}

CandidateSet build_candidate_set(const Question& q, const CorpusStore& store,
                                 const InvertedIndex& index, const HyperlinkGraph& graph,
                                 int n_kwm, int n_tfidf, bool forward_only_links) {
    CandidateSet cs;
    cs.qid = q.id;
    std::set<std::string> present;
    auto append = [&](const std::vector<std::string>& pids, CandidateSource source) {
        int rank = 0;
        for (const std::string& pid : pids) {
            if (present.insert(pid).second) {
                cs.entries.push_back({pid, source, rank});
            }
            ++rank;
        }
    };
    std::vector<std::string> kwm = retrieve_kwm(q, index, store, n_kwm);
    std::vector<std::string> tfidf = retrieve_tfidf(q, index, n_tfidf);
    append(kwm, CandidateSource::kwm);
    append(tfidf, CandidateSource::tfidf);

    std::vector<std::string> seeds = kwm;
    for (const std::string& pid : tfidf) {
        if (std::find(seeds.begin(), seeds.end(), pid) == seeds.end()) seeds.push_back(pid);
    }
    append(expand_hyperlinks(seeds, graph, forward_only_links), CandidateSource::hyperlink);
    return cs;
}

}  // namespace gmf
