#include "amod/io.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace amod {

namespace {

std::string strip_comment(const std::string& line) {
    auto pos = line.find('~');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) {
    for (char c : s)
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    return true;
}

// "<NUMBER OF NODES> 24" -> tag "NUMBER OF NODES", value "24"
bool parse_meta(const std::string& line, std::string& tag, std::string& value) {
    auto open = line.find('<');
    auto close = line.find('>');
    if (open == std::string::npos || close == std::string::npos || close < open) return false;
    tag = line.substr(open + 1, close - open - 1);
    value = line.substr(close + 1);
    return true;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Network parse_tntp_net(const std::string& net_text) {
    std::istringstream in(net_text);
    std::string line;
    int num_nodes = -1, num_links = -1;
    std::vector<Arc> arcs;
    bool in_rows = false;

    while (std::getline(in, line)) {
        line = strip_comment(line);
        if (blank(line)) continue;
        std::string tag, value;
        if (!in_rows && parse_meta(line, tag, value)) {
            if (tag == "NUMBER OF NODES") num_nodes = std::stoi(value);
            else if (tag == "NUMBER OF LINKS") num_links = std::stoi(value);
            else if (tag == "END OF METADATA") in_rows = true;
            continue;
        }
        in_rows = true;  // data row before END OF METADATA still counts
        std::istringstream row(line);
        Arc a;
        double length = 0.0, b = -1.0, power = -1.0;
        if (!(row >> a.tail >> a.head >> a.capacity >> length >> a.t0))
            throw std::runtime_error("tntp net: malformed row: " + line);
        if (row >> b >> power) {
            if (b > 0.0) a.bpr_alpha = b;
            if (power >= 1.0) a.bpr_beta = power;
        }
        arcs.push_back(a);
    }
    if (num_nodes <= 0 || num_links < 0)
        throw std::runtime_error("tntp net: malformed header (missing node or link count)");
    if (static_cast<int>(arcs.size()) != num_links)
        throw std::runtime_error("tntp net: header declares " + std::to_string(num_links) +
                                 " links, file has " + std::to_string(arcs.size()));
    return Network(num_nodes, std::move(arcs));
}

RequestSet parse_tntp_trips(const std::string& trips_text, int num_vertices) {
    std::istringstream in(trips_text);
    std::string line;
    RequestSet requests;
    int origin = -1;

    while (std::getline(in, line)) {
        line = strip_comment(line);
        if (blank(line)) continue;
        std::string tag, value;
        if (parse_meta(line, tag, value)) continue;
        std::istringstream row(line);
        std::string word;
        row >> word;
        if (word == "Origin") {
            if (!(row >> origin)) throw std::runtime_error("tntp trips: malformed Origin line");
            if (origin < 1 || origin > num_vertices)
                throw std::runtime_error("tntp trips: origin " + std::to_string(origin) +
                                         " references unknown node");
            continue;
        }
        if (origin < 0) throw std::runtime_error("tntp trips: OD entry before any Origin line");
        // entries: "dest : rate ;" repeated
        std::istringstream entries(line);
        std::string chunk;
        while (std::getline(entries, chunk, ';')) {
            if (blank(chunk)) continue;
            auto colon = chunk.find(':');
            if (colon == std::string::npos)
                throw std::runtime_error("tntp trips: malformed OD entry: " + chunk);
            const int dest = std::stoi(chunk.substr(0, colon));
            const double rate = std::stod(chunk.substr(colon + 1));
            if (dest < 1 || dest > num_vertices)
                throw std::runtime_error("tntp trips: destination " + std::to_string(dest) +
                                         " references unknown node");
            if (rate == 0.0) continue;
            if (rate < 0.0) throw std::runtime_error("tntp trips: negative OD rate");
            if (dest == origin)
                throw std::runtime_error("tntp trips: nonzero self demand at node " +
                                         std::to_string(origin));
            requests.push_back({origin, dest, rate, RequestClass::private_vehicle});
        }
    }
    return requests;
}

std::pair<Network, RequestSet> parse_tntp(const std::string& net_text,
                                          const std::string& trips_text) {
    Network net = parse_tntp_net(net_text);
    RequestSet requests = parse_tntp_trips(trips_text, net.num_vertices());
    return {std::move(net), std::move(requests)};
}

std::string serialize_tntp_net(const Network& net) {
    std::ostringstream out;
    out << "<NUMBER OF ZONES> " << net.num_vertices() << "\n";
    out << "<NUMBER OF NODES> " << net.num_vertices() << "\n";
    out << "<FIRST THRU NODE> 1\n";
    out << "<NUMBER OF LINKS> " << net.num_arcs() << "\n";
    out << "<END OF METADATA>\n\n";
    out << "~ Init node\tTerm node\tCapacity\tLength\tFree Flow Time\tB\tPower\tSpeed limit\tToll\tLink Type\t;\n";
    for (const Arc& a : net.arcs()) {
        out << "\t" << a.tail << "\t" << a.head << "\t" << fmt(a.capacity) << "\t" << fmt(a.t0)
            << "\t" << fmt(a.t0) << "\t" << fmt(a.bpr_alpha) << "\t" << fmt(a.bpr_beta)
            << "\t0\t0\t1\t;\n";
    }
    return out.str();
}

std::string serialize_tntp_trips(const RequestSet& requests, int num_vertices) {
    double total = 0.0;
    for (const Request& r : requests) total += r.rate;
    std::ostringstream out;
    out << "<NUMBER OF ZONES> " << num_vertices << "\n";
    out << "<TOTAL OD FLOW> " << fmt(total) << "\n";
    out << "<END OF METADATA>\n\n";
    for (int o = 1; o <= num_vertices; ++o) {
        bool any = false;
        for (const Request& r : requests) any = any || r.origin == o;
        if (!any) continue;
        out << "Origin " << o << "\n";
        for (const Request& r : requests)
            if (r.origin == o) out << "    " << r.destination << " : " << fmt(r.rate) << ";\n";
        out << "\n";
    }
    return out.str();
}

Network parse_network_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    const int nv = j.at("nodes").get<int>();
    std::vector<Arc> arcs;
    for (const auto& ja : j.at("arcs")) {
        Arc a;
        a.tail = ja.at("tail").get<int>();
        a.head = ja.at("head").get<int>();
        a.t0 = ja.at("t0").get<double>();
        a.capacity = ja.at("capacity").get<double>();
        if (ja.contains("alpha")) a.bpr_alpha = ja.at("alpha").get<double>();
        if (ja.contains("beta")) a.bpr_beta = ja.at("beta").get<double>();
        arcs.push_back(a);
    }
    return Network(nv, std::move(arcs));
}

std::string serialize_network_json(const Network& net) {
    nlohmann::json j;
    j["nodes"] = net.num_vertices();
    j["arcs"] = nlohmann::json::array();
    for (const Arc& a : net.arcs())
        j["arcs"].push_back({{"tail", a.tail},
                             {"head", a.head},
                             {"t0", a.t0},
                             {"capacity", a.capacity},
                             {"alpha", a.bpr_alpha},
                             {"beta", a.bpr_beta}});
    return j.dump(2);
}

RequestSet parse_requests_json(const std::string& json_text) {
    const auto j = nlohmann::json::parse(json_text);
    RequestSet out;
    for (const auto& jr : j) {
        Request r;
        r.origin = jr.at("o").get<int>();
        r.destination = jr.at("d").get<int>();
        r.rate = jr.at("alpha").get<double>();
        if (jr.contains("class")) {
            const std::string c = jr.at("class").get<std::string>();
            if (c == "private") r.cls = RequestClass::private_vehicle;
            else if (c == "individual") r.cls = RequestClass::amod_individual;
            else if (c == "poolable") r.cls = RequestClass::amod_poolable;
            else throw std::runtime_error("unknown request class: " + c);
        }
        out.push_back(r);
    }
    return out;
}

std::string serialize_requests_json(const RequestSet& requests) {
    nlohmann::json j = nlohmann::json::array();
    for (const Request& r : requests)
        j.push_back({{"o", r.origin},
                     {"d", r.destination},
                     {"alpha", r.rate},
                     {"class", to_string(r.cls)}});
    return j.dump(2);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

std::uint64_t fnv1a(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t network_hash(const Network& net) { return fnv1a(serialize_tntp_net(net)); }

std::uint64_t requests_hash(const RequestSet& requests) {
    return fnv1a(serialize_requests_json(requests));
}

}  // namespace amod
