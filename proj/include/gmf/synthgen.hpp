#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gmf/corpus.hpp"

namespace gmf {

struct SynthSpec {
    std::uint64_t seed = 7;
    int n_entities = 300;  // background filler paragraphs
    int n_bridge_questions = 150;
    int n_comparison_questions = 50;
    int n_distractors_per_question = 6;
    int n_decoys_per_comparison = 8;  // bridge-target lookalikes, never gold
    int vocab_size = 2000;            // shared junk-term pool
    double link_direction_mix = 0.5;  // fraction of bridge pairs linked forward
    double train_fraction = 0.75;
};

struct SynthQuestionInfo {
    std::string qid;
    QuestionType qtype = QuestionType::bridge;
    std::vector<std::string> gold;
    bool forward_link = true;  // bridge only
};

struct SynthManifest {
    SynthSpec spec;
    std::vector<SynthQuestionInfo> questions;
    std::vector<std::string> train_qids;
    std::vector<std::string> test_qids;
    int backward_pairs = 0;       // bridge pairs linked B -> A only
    int test_backward_pairs = 0;
    std::size_t paragraphs = 0;
};

struct SynthOutput {
    std::string corpus_path;
    std::string questions_train_path;
    std::string questions_test_path;
    std::string manifest_path;
    SynthManifest manifest;
};

SynthSpec synth_spec_from_json_file(const std::string& path);
void save_manifest(const SynthManifest& m, const std::string& path);
SynthManifest load_manifest(const std::string& path);

SynthOutput generate(const SynthSpec& spec, const std::string& out_dir);

}  // namespace gmf
