#pragma once

#include <array>
#include <map>
#include <vector>

#include "amod/demand.hpp"
#include "amod/matrix.hpp"
#include "amod/network.hpp"

namespace amod {

// One vehicle leg of a pooling itinerary. `users` is 1 on solo legs and 2 on
// the shared middle leg (and on the single self-pooling leg).
struct PoolLeg {
    int from = 0;
    int to = 0;
    int users = 1;
};

// Serving order for a request pair. c in {1..4} enumerates the two-request
// interleavings; c = 0 is reserved for "no pooling"; the self-pool of a
// request with itself is the single order (o,o,d,d).
struct PoolConfig {
    int m = 0;
    int n = 0;
    int c = 0;
    std::array<int, 4> seq{};      // visited nodes
    int m_start = 0, m_end = 0;    // span of request m within seq
    int n_start = 0, n_end = 0;
    std::vector<PoolLeg> legs;     // zero-length legs dropped
};

enum class PairMember { m, n };

std::vector<PoolConfig> enumerate_configs(const Request& rm, const Request& rn, int m_index,
                                          int n_index);

// Free-flow detour of one member: leg times along its span minus its direct
// shortest-path time.
double config_delay(const Network& net, const PoolConfig& config, PairMember member);

// Configuration ids whose both delays stay within dbar.
std::vector<int> feasible_set(const Network& net, const Request& rm, const Request& rn,
                              double dbar);

// Demand matrix of the config legs at unit vehicle rate per leg.
Matrix config_demand_matrix(const PoolConfig& config, int num_vertices);

// Probability that two Poisson streams with rates am, an each have an
// occurrence within tbar of the other.
double pool_probability(double am, double an, double tbar);

struct ConfigOption {
    int c = 0;
    double delay_m = 0.0;
    double delay_n = 0.0;
    std::vector<PoolLeg> legs;
};

struct PairCatalog {
    int m = 0;
    int n = 0;  // n > m
    std::vector<ConfigOption> options;  // nonempty, ascending c
};

// Precomputed pooling candidates for a poolable request set. Pairs whose four
// configurations are all infeasible are omitted; self-pool entries always
// exist, so the joint program stays feasible.
struct ConfigCatalog {
    double dbar = kInf;
    double pair_rate_floor = 0.0;
    RequestSet requests;                       // index space 0..M-1
    std::vector<std::vector<PoolLeg>> self_legs;
    std::vector<PairCatalog> pairs;            // ascending (m, n)

    const PairCatalog* find_pair(int m, int n) const;
    std::size_t num_pair_options() const;
};

// Requires distinct ODs within the poolable set and connected OD pairs.
// Pairs where either rate is below `pair_rate_floor` are not enumerated.
ConfigCatalog precompute_catalog(const Network& net, const RequestSet& poolable, double dbar,
                                 double pair_rate_floor = 0.0);

std::string serialize_catalog_json(const ConfigCatalog& catalog, const Network& net);
ConfigCatalog parse_catalog_json(const std::string& json_text, const Network& net);

}  // namespace amod
