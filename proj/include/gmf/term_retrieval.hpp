#pragma once

#include <map>
#include <string>
#include <vector>

#include "gmf/corpus.hpp"

namespace gmf {

// Lowercase, split on non-alphanumeric, unigrams followed by adjacent bigrams ("a_b").
std::vector<std::string> tokenize(const std::string& text);
std::vector<std::string> tokenize_unigrams(const std::string& text);

struct InvertedIndex {
    std::map<std::string, int> vocab;                       // term -> term id
    std::vector<std::vector<std::pair<std::string, int>>> postings;  // term id -> (pid, tf), sorted by pid
    std::vector<int> doc_freq;                              // term id -> distinct docs
    std::size_t doc_count = 0;
    std::map<std::string, std::map<int, int>> doc_terms;    // pid -> term id -> tf

    int term_id(const std::string& term) const {
        auto it = vocab.find(term);
        return it == vocab.end() ? -1 : it->second;
    }
};

InvertedIndex build_index(const CorpusStore& store);
void save_index(const InvertedIndex& index, const std::string& path);
InvertedIndex load_index(const std::string& path);

// idf(t) = max(0, log((N - df + 0.5) / (df + 0.5))), weight = log(1 + tf) * idf.
double tfidf_score(const std::vector<std::string>& question_terms, const std::string& pid,
                   const InvertedIndex& index);

std::vector<std::string> retrieve_kwm(const Question& q, const InvertedIndex& index,
                                      const CorpusStore& store, int n_kwm);
std::vector<std::string> retrieve_tfidf(const Question& q, const InvertedIndex& index,
                                        int n_tfidf);
std::vector<std::string> expand_hyperlinks(const std::vector<std::string>& seeds,
                                           const HyperlinkGraph& graph,
                                           bool forward_only = false);

enum class CandidateSource { kwm, tfidf, hyperlink };
std::string to_string(CandidateSource s);

struct CandidateEntry {
    std::string pid;
    CandidateSource source;
    int rank = 0;  // position within its source list
};

struct CandidateSet {
    std::string qid;
    std::vector<CandidateEntry> entries;

    std::vector<std::string> ids() const;
    bool contains(const std::string& pid) const;
};

CandidateSet build_candidate_set(const Question& q, const CorpusStore& store,
                                 const InvertedIndex& index, const HyperlinkGraph& graph,
                                 int n_kwm, int n_tfidf, bool forward_only_links = false);

}  // namespace gmf
