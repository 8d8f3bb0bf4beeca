#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gmf/corpus.hpp"
#include "gmf/linalg.hpp"

namespace gmf {

// Unigram vocabulary with the four special symbols at fixed indices.
class TokenVocab {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;
    static constexpr int kQMark = 2;
    static constexpr int kSep = 3;

    TokenVocab();

    int lookup(const std::string& term) const;  // kUnk if absent
    int add(const std::string& term);
    std::size_t size() const { return terms_.size(); }
    const std::vector<std::string>& terms() const { return terms_; }

    static TokenVocab build(const CorpusStore& store, const std::vector<Question>& questions);

private:
    std::map<std::string, int> index_;
    std::vector<std::string> terms_;
};

struct ModelConfig {
    int dim = 32;        // d
    int heads = 4;       // h, must divide d
    int max_len = 128;
    std::uint64_t seed = 1;
};

// Every trainable tensor, flat and seedable. The encoder is a tanh-affine
// bag-of-embeddings map; the flow tensors implement the scoring head and the
// multi-head memory readout.
struct ModelParams {
    ModelConfig config;

    Mat embeddings;          // V x d
    Mat enc_affine;          // d x d
    Vec enc_bias;            // d

    std::vector<Mat> w_query;  // per head, (d/h) x d
    std::vector<Mat> w_key;
    std::vector<Mat> w_value;
    Mat w_out;               // d x d, applied to the readout
    Mat w_input;             // d x d, applied to x_t
    Vec w_score;             // d, the 1 x d scoring row

    int head_dim() const { return config.dim / config.heads; }

    static ModelParams init(const ModelConfig& cfg, std::size_t vocab_size);
    static ModelParams zeros_like(const ModelParams& other);

    // All tensors in a fixed order, for updates / flattening / serialization.
    std::vector<Mat*> matrices();
    std::vector<const Mat*> matrices() const;
    std::vector<Vec*> vectors();
    std::vector<const Vec*> vectors() const;

    std::vector<double> flatten() const;
    void unflatten(const std::vector<double>& flat);
};

struct Checkpoint {
    ModelParams params;
    TokenVocab vocab;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct Encoding {
    Mat h;  // l x d
    Vec x;  // d, mean of h's rows
    std::vector<int> tokens;
};

Vec pool(const Mat& h);

Encoding encode(const ModelParams& params, const TokenVocab& vocab,
                const std::string& question, const Paragraph& paragraph, int max_len);

struct EncoderGrads {
    Mat d_embeddings;
    Mat d_affine;
    Vec d_bias;
};

// Chain rule through the mean pooling and tanh, given upstream d_x.
EncoderGrads encode_backward(const ModelParams& params, const Encoding& enc, const Vec& d_x);

// Same thing, accumulating into a shared gradient container.
void encode_backward_into(const ModelParams& params, const Encoding& enc, const Vec& d_x,
                          ModelParams& grad);

}  // namespace gmf
