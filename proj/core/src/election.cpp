#include <algorithm>
#include <numeric>

#include "unweaver/errors.hpp"
#include "unweaver/retrieval.hpp"

namespace unweaver {
namespace {

// Gains are sums of harmonic increments; this absorbs summation-order noise
// so that equal gains fall through to the lower-id tie-break.
constexpr double kTieTolerance = 1e-12;

bool is_exact(ElectionRule rule) {
    return rule == ElectionRule::kExactPav || rule == ElectionRule::kExactCc;
}

bool is_pav(ElectionRule rule) {
    return rule == ElectionRule::kPavGreedy || rule == ElectionRule::kExactPav;
}

// Utility gained by voter with `held` approved winners when one more is added.
double increment(ElectionRule rule, std::size_t held) {
    if (rule == ElectionRule::kAv) {
        return 1.0;
    }
    if (is_pav(rule)) {
        return 1.0 / static_cast<double>(held + 1);
    }
    return held == 0 ? 1.0 : 0.0;
}

// Greedy selection of `r` winners among `pool` (candidate ids, ascending).
std::vector<ChunkId> greedy(const BinaryMatrix& ballots, const std::vector<std::size_t>& pool,
                            std::size_t r, ElectionRule rule) {
    std::vector<std::size_t> held(ballots.rows(), 0);
    std::vector<bool> taken(ballots.cols(), false);
    std::vector<ChunkId> winners;
    for (std::size_t round = 0; round < r && round < pool.size(); ++round) {
        double best_gain = -1.0;
        std::size_t best = pool.front();
        for (const auto c : pool) {
            if (taken[c]) {
                continue;
            }
            double gain = 0.0;
            for (std::size_t v = 0; v < ballots.rows(); ++v) {
                if (ballots.at(v, c)) {
                    gain += increment(rule, held[v]);
                }
            }
            if (gain > best_gain + kTieTolerance) {
                best_gain = gain;
                best = c;
            }
        }
        taken[best] = true;
        winners.push_back(static_cast<ChunkId>(best));
        for (std::size_t v = 0; v < ballots.rows(); ++v) {
            if (ballots.at(v, best)) {
                ++held[v];
            }
        }
    }
    return winners;
}

std::vector<ChunkId> exact(const BinaryMatrix& ballots, std::size_t r, ElectionRule rule) {
    const std::size_t k = ballots.cols();
    std::vector<std::size_t> combo(r);
    std::iota(combo.begin(), combo.end(), 0);

    std::vector<ChunkId> best;
    double best_score = -1.0;
    std::vector<ChunkId> committee(r);
    while (true) {
        std::transform(combo.begin(), combo.end(), committee.begin(),
                       [](std::size_t c) { return static_cast<ChunkId>(c); });
        const double score = committee_score(ballots, committee, rule);
        if (score > best_score + kTieTolerance) {
            best_score = score;
            best = committee;
        }
        // Advance to the next combination in lexicographic order.
        std::size_t i = r;
        while (i > 0 && combo[i - 1] == k - r + (i - 1)) {
            --i;
        }
        if (i == 0) {
            break;
        }
        ++combo[i - 1];
        for (std::size_t j = i; j < r; ++j) {
            combo[j] = combo[j - 1] + 1;
        }
    }

    // Report the optimal committee in greedy-pick order.
    std::vector<std::size_t> pool(best.begin(), best.end());
    return greedy(ballots, pool, r, rule == ElectionRule::kExactPav ? ElectionRule::kPavGreedy
                                                                    : ElectionRule::kCcGreedy);
}

}  // namespace

double harmonic(std::size_t n) {
    double h = 0.0;
    for (std::size_t i = 1; i <= n; ++i) {
        h += 1.0 / static_cast<double>(i);
    }
    return h;
}

double committee_score(const BinaryMatrix& ballots, const std::vector<ChunkId>& committee,
                       ElectionRule rule) {
    double total = 0.0;
    for (std::size_t v = 0; v < ballots.rows(); ++v) {
        std::size_t held = 0;
        for (const auto c : committee) {
            held += ballots.at(v, static_cast<std::size_t>(c)) ? 1 : 0;
        }
        if (rule == ElectionRule::kAv) {
            total += static_cast<double>(held);
        } else if (is_pav(rule)) {
            total += harmonic(held);
        } else {
            total += held > 0 ? 1.0 : 0.0;
        }
    }
    return total;
}

ElectionOutcome elect_chunks(const BinaryMatrix& ballots, const ElectionConfig& cfg) {
    if (cfg.r < 1) {
        throw InvalidArgument("election size r must be >= 1");
    }
    const std::size_t k = ballots.cols();
    if (is_exact(cfg.rule) && k > kMaxExactCandidates) {
        throw InvalidArgument("exact rules are limited to " +
                              std::to_string(kMaxExactCandidates) + " candidates, got " +
                              std::to_string(k));
    }

    ElectionOutcome out;
    out.approvals.resize(k);
    for (std::size_t c = 0; c < k; ++c) {
        out.approvals[c] = static_cast<double>(ballots.col_sum(c));
    }
    const std::size_t r = std::min(static_cast<std::size_t>(cfg.r), k);
    if (r == 0) {
        return out;
    }

    if (cfg.rule == ElectionRule::kAv) {
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return out.approvals[a] > out.approvals[b];
        });
        for (std::size_t i = 0; i < r; ++i) {
            out.winners.push_back(static_cast<ChunkId>(order[i]));
        }
    } else if (is_exact(cfg.rule)) {
        out.winners = exact(ballots, r, cfg.rule);
    } else {
        std::vector<std::size_t> pool(k);
        std::iota(pool.begin(), pool.end(), 0);
        out.winners = greedy(ballots, pool, r, cfg.rule);
    }

    out.committee_score = committee_score(ballots, out.winners, cfg.rule);
    out.padded = std::any_of(out.winners.begin(), out.winners.end(), [&](ChunkId c) {
        return out.approvals[static_cast<std::size_t>(c)] == 0.0;
    });
    return out;
}

}  // namespace unweaver
