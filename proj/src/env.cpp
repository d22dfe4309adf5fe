#include "env.hpp"

#include <numeric>

#include "error.hpp"

namespace avar {

GroundedLookupEnv::GroundedLookupEnv(const EnvConfig& cfg) : cfg_(cfg) {
    if (cfg_.n_keys < 1 || cfg_.n_values < 2)
        throw Error(Errc::invalid_config, "need >= 1 key and >= 2 values");
    if (cfg_.pairs_per_episode < 1 || cfg_.pairs_per_episode > cfg_.n_keys)
        throw Error(Errc::invalid_config, "pairs_per_episode must be in [1, n_keys]");
}

Episode GroundedLookupEnv::sample_episode(Rng& rng) const {
    Episode ep;

    std::vector<int> keys(cfg_.n_keys);
    std::iota(keys.begin(), keys.end(), 0);
    // Partial Fisher-Yates: the first pairs_per_episode entries become the
    // episode's distinct keys.
    for (int i = 0; i < cfg_.pairs_per_episode; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(cfg_.n_keys - i)));
        std::swap(keys[i], keys[j]);
    }
    std::vector<int> values(cfg_.pairs_per_episode);
    for (int& v : values) v = static_cast<int>(rng.below(static_cast<uint64_t>(cfg_.n_values)));

    const int asked = static_cast<int>(rng.below(static_cast<uint64_t>(cfg_.pairs_per_episode)));
    ep.queried_key = keys[asked];
    ep.correct_value = values[asked];
    ep.correct_value_symbol = value_symbol(ep.correct_value);

    // Distractor is a plausible wrong answer: any value except the correct one.
    int distractor = static_cast<int>(rng.below(static_cast<uint64_t>(cfg_.n_values - 1)));
    if (distractor >= ep.correct_value) ++distractor;
    ep.distractor_value_symbol = value_symbol(distractor);

    const int k = cfg_.pairs_per_episode;
    ep.prompt.reserve(prompt_len());
    ep.prompt.push_back(kSys);
    ep.prompt.push_back(ep.distractor_value_symbol);
    ep.prompt.push_back(kSys);
    for (int i = 0; i < k; ++i) {
        ep.prompt.push_back(img_key_symbol(keys[i]));
        ep.prompt.push_back(img_value_symbol(values[i]));
    }
    ep.prompt.push_back(kAsk);
    ep.prompt.push_back(key_symbol(ep.queried_key));

    ep.prompt_seg.total_len = static_cast<int>(ep.prompt.size());
    ep.prompt_seg.system_span = {0, 3};
    ep.prompt_seg.image_spans = {{3, 3 + 2 * k}};
    ep.prompt_seg.user_spans = {{3 + 2 * k, 3 + 2 * k + 2}};
    ep.prompt_seg.response_span = {ep.prompt_seg.total_len, ep.prompt_seg.total_len};

    ep.target_response = {kAns, ep.correct_value_symbol, kEos};
    return ep;
}

bool GroundedLookupEnv::is_correct(const Episode& ep, std::span<const int> response) const {
    for (int sym : response)
        if (is_value_symbol(sym)) return sym == ep.correct_value_symbol;
    return false;
}

bool GroundedLookupEnv::is_format_ok(const Episode& /*ep*/, std::span<const int> response) const {
    return response.size() == 3 && response[0] == kAns && is_value_symbol(response[1]) &&
           response[2] == kEos;
}

}  // namespace avar
