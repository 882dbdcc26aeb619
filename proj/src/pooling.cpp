#include "amod/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "amod/io.hpp"

namespace amod {

namespace {

PoolConfig make_config(int m, int n, int c, std::array<int, 4> seq, int ms, int me, int ns,
                       int ne, bool self) {
    PoolConfig cfg;
    cfg.m = m;
    cfg.n = n;
    cfg.c = c;
    cfg.seq = seq;
    cfg.m_start = ms;
    cfg.m_end = me;
    cfg.n_start = ns;
    cfg.n_end = ne;
    if (self) {
        cfg.legs.push_back({seq[0], seq[2], 2});
        return cfg;
    }
    for (int p = 0; p < 3; ++p) {
        if (seq[p] == seq[p + 1]) continue;
        cfg.legs.push_back({seq[p], seq[p + 1], p == 1 ? 2 : 1});
    }
    return cfg;
}

// Cache of free-flow shortest-path distances, one Dijkstra per source node.
class DistCache {
public:
    DistCache(const Network& net, std::vector<double> costs)
        : net_(net), costs_(std::move(costs)) {}

    double operator()(int from, int to) {
        if (from == to) return 0.0;
        auto it = trees_.find(from);
        if (it == trees_.end())
            it = trees_.emplace(from, shortest_paths(net_, costs_, from)).first;
        return it->second.dist[to - 1];
    }

private:
    const Network& net_;
    std::vector<double> costs_;
    std::map<int, ShortestPathTree> trees_;
};

double span_delay(DistCache& dist, const PoolConfig& cfg, int start, int end, int o, int d) {
    double along = 0.0;
    for (int p = start; p < end; ++p) along += dist(cfg.seq[p], cfg.seq[p + 1]);
    return along - dist(o, d);
}

}  // namespace

std::vector<PoolConfig> enumerate_configs(const Request& rm, const Request& rn, int m_index,
                                          int n_index) {
    const int om = rm.origin, dm = rm.destination;
    const int on = rn.origin, dn = rn.destination;
    if (m_index == n_index)
        return {make_config(m_index, n_index, 1, {om, om, dm, dm}, 0, 2, 1, 3, true)};
    return {
        make_config(m_index, n_index, 1, {om, on, dm, dn}, 0, 2, 1, 3, false),
        make_config(m_index, n_index, 2, {om, on, dn, dm}, 0, 3, 1, 2, false),
        make_config(m_index, n_index, 3, {on, om, dm, dn}, 1, 2, 0, 3, false),
        make_config(m_index, n_index, 4, {on, om, dn, dm}, 1, 3, 0, 2, false),
    };
}

double config_delay(const Network& net, const PoolConfig& config, PairMember member) {
    DistCache dist(net, net.free_flow_times());
    if (member == PairMember::m)
        return span_delay(dist, config, config.m_start, config.m_end,
                          config.seq[config.m_start], config.seq[config.m_end]);
    return span_delay(dist, config, config.n_start, config.n_end, config.seq[config.n_start],
                      config.seq[config.n_end]);
}

std::vector<int> feasible_set(const Network& net, const Request& rm, const Request& rn,
                              double dbar) {
    if (dbar < 0.0) throw std::invalid_argument("feasible_set: dbar must be nonnegative");
    const bool self = rm.origin == rn.origin && rm.destination == rn.destination;
    std::vector<int> feasible;
    for (const PoolConfig& cfg : enumerate_configs(rm, rn, 0, self ? 0 : 1)) {
        const double dm = config_delay(net, cfg, PairMember::m);
        const double dn = config_delay(net, cfg, PairMember::n);
        if (dm <= dbar && dn <= dbar) feasible.push_back(cfg.c);
    }
    return feasible;
}

Matrix config_demand_matrix(const PoolConfig& config, int num_vertices) {
    Matrix d(num_vertices, num_vertices);
    for (const PoolLeg& leg : config.legs) d(leg.to - 1, leg.from - 1) += 1.0;
    for (int j = 0; j < num_vertices; ++j) {
        double col = 0.0;
        for (int i = 0; i < num_vertices; ++i)
            if (i != j) col += d(i, j);
        d(j, j) = -col;
    }
    return d;
}

double pool_probability(double am, double an, double tbar) {
    if (!(am > 0.0) || !(an > 0.0))
        throw std::invalid_argument("pool_probability: rates must be positive");
    if (tbar < 0.0) throw std::invalid_argument("pool_probability: tbar must be nonnegative");
    if (std::isinf(tbar)) return 1.0;
    return 1.0 - (am * std::exp(-an * tbar) + an * std::exp(-am * tbar)) / (am + an);
}

const PairCatalog* ConfigCatalog::find_pair(int m, int n) const {
    if (m > n) std::swap(m, n);
    auto it = std::lower_bound(pairs.begin(), pairs.end(), std::make_pair(m, n),
                               [](const PairCatalog& p, const std::pair<int, int>& key) {
                                   return std::make_pair(p.m, p.n) < key;
                               });
    if (it != pairs.end() && it->m == m && it->n == n) return &*it;
    return nullptr;
}

std::size_t ConfigCatalog::num_pair_options() const {
    std::size_t n = 0;
    for (const PairCatalog& p : pairs) n += p.options.size();
    return n;
}

ConfigCatalog precompute_catalog(const Network& net, const RequestSet& poolable, double dbar,
                                 double pair_rate_floor) {
    if (dbar < 0.0) throw std::invalid_argument("precompute_catalog: dbar must be nonnegative");
    validate_requests(poolable, net.num_vertices());

    ConfigCatalog cat;
    cat.dbar = dbar;
    cat.pair_rate_floor = pair_rate_floor;
    cat.requests = poolable;

    DistCache dist(net, net.free_flow_times());
    const int M = static_cast<int>(poolable.size());

    for (int m = 0; m < M; ++m) {
        const Request& r = poolable[m];
        if (std::isinf(dist(r.origin, r.destination)))
            throw std::runtime_error("precompute_catalog: request " + std::to_string(m) +
                                     " has a disconnected OD pair");
        cat.self_legs.push_back({{r.origin, r.destination, 2}});
    }

    for (int m = 0; m < M; ++m) {
        if (poolable[m].rate < pair_rate_floor) continue;
        for (int n = m + 1; n < M; ++n) {
            if (poolable[n].rate < pair_rate_floor) continue;
            PairCatalog pc;
            pc.m = m;
            pc.n = n;
            for (const PoolConfig& cfg : enumerate_configs(poolable[m], poolable[n], m, n)) {
                const double dm = span_delay(dist, cfg, cfg.m_start, cfg.m_end,
                                             cfg.seq[cfg.m_start], cfg.seq[cfg.m_end]);
                const double dn = span_delay(dist, cfg, cfg.n_start, cfg.n_end,
                                             cfg.seq[cfg.n_start], cfg.seq[cfg.n_end]);
                if (dm <= dbar && dn <= dbar) pc.options.push_back({cfg.c, dm, dn, cfg.legs});
            }
            if (!pc.options.empty()) cat.pairs.push_back(std::move(pc));
        }
    }
    return cat;
}

std::string serialize_catalog_json(const ConfigCatalog& catalog, const Network& net) {
    nlohmann::json j;
    j["network_hash"] = network_hash(net);
    j["requests_hash"] = requests_hash(catalog.requests);
    j["dbar"] = catalog.dbar;
    j["pair_rate_floor"] = catalog.pair_rate_floor;
    j["requests"] = nlohmann::json::parse(serialize_requests_json(catalog.requests));
    j["pairs"] = nlohmann::json::array();
    for (const PairCatalog& p : catalog.pairs) {
        nlohmann::json jp;
        jp["m"] = p.m;
        jp["n"] = p.n;
        jp["options"] = nlohmann::json::array();
        for (const ConfigOption& o : p.options)
            jp["options"].push_back({{"c", o.c}, {"delay_m", o.delay_m}, {"delay_n", o.delay_n}});
        j["pairs"].push_back(jp);
    }
    return j.dump();
}

ConfigCatalog parse_catalog_json(const std::string& json_text, const Network& net) {
    const auto j = nlohmann::json::parse(json_text);
    if (j.at("network_hash").get<std::uint64_t>() != network_hash(net))
        throw std::runtime_error("catalog cache was built for a different network");
    ConfigCatalog cat;
    cat.dbar = j.at("dbar").get<double>();
    cat.pair_rate_floor = j.at("pair_rate_floor").get<double>();
    cat.requests = parse_requests_json(j.at("requests").dump());
    for (const Request& r : cat.requests)
        cat.self_legs.push_back({{r.origin, r.destination, 2}});
    for (const auto& jp : j.at("pairs")) {
        PairCatalog p;
        p.m = jp.at("m").get<int>();
        p.n = jp.at("n").get<int>();
        const auto configs = enumerate_configs(cat.requests[p.m], cat.requests[p.n], p.m, p.n);
        for (const auto& jo : jp.at("options")) {
            ConfigOption o;
            o.c = jo.at("c").get<int>();
            o.delay_m = jo.at("delay_m").get<double>();
            o.delay_n = jo.at("delay_n").get<double>();
            o.legs = configs[o.c - 1].legs;
            p.options.push_back(std::move(o));
        }
        cat.pairs.push_back(std::move(p));
    }
    return cat;
}

}  // namespace amod
