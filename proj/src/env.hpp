#pragma once

#include <span>
#include <vector>

#include "rng.hpp"
#include "segmentation.hpp"

namespace avar {

// Grounded-lookup task: the image span lists key/value pairs as image
// symbols, the user span asks for one key, and the system span plants a
// distractor value. Answering correctly requires reading the image span;
// copying the system distractor is always wrong by construction.

struct EnvConfig {
    int n_keys = 6;             // key alphabet size
    int n_values = 6;           // value alphabet size
    int pairs_per_episode = 3;  // distinct keys shown per episode
};

struct Episode {
    std::vector<int> prompt;
    TokenSegmentation prompt_seg;  // response span empty
    int queried_key = 0;           // key index in [0, n_keys)
    int correct_value = 0;         // value index in [0, n_values)
    int correct_value_symbol = 0;  // text symbol of the correct answer
    int distractor_value_symbol = 0;
    std::vector<int> target_response;  // [ANS, value, EOS]
};

class GroundedLookupEnv {
  public:
    // Text vocabulary: specials, then key symbols, then value symbols.
    static constexpr int kSys = 0;
    static constexpr int kAsk = 1;
    static constexpr int kAns = 2;
    static constexpr int kEos = 3;
    static constexpr int kNumSpecials = 4;

    explicit GroundedLookupEnv(const EnvConfig& cfg = {});

    const EnvConfig& config() const { return cfg_; }

    int key_symbol(int k) const { return kNumSpecials + k; }
    int value_symbol(int v) const { return kNumSpecials + cfg_.n_keys + v; }
    int img_key_symbol(int k) const { return k; }
    int img_value_symbol(int v) const { return cfg_.n_keys + v; }
    bool is_value_symbol(int sym) const {
        return sym >= value_symbol(0) && sym < value_symbol(cfg_.n_values);
    }

    int text_vocab_needed() const { return kNumSpecials + cfg_.n_keys + cfg_.n_values; }
    int image_vocab_needed() const { return cfg_.n_keys + cfg_.n_values; }
    int prompt_len() const { return 3 + 2 * cfg_.pairs_per_episode + 2; }
    int response_len() const { return 3; }

    Episode sample_episode(Rng& rng) const;

    // 1 iff the first value symbol in the response is the correct answer.
    bool is_correct(const Episode& ep, std::span<const int> response) const;
    // 1 iff the response is exactly [ANS, value symbol, EOS].
    bool is_format_ok(const Episode& ep, std::span<const int> response) const;

  private:
    EnvConfig cfg_;
};

}  // namespace avar
