#pragma once

#include <cstdint>
#include <string>
#include <utility>

#include "amod/demand.hpp"
#include "amod/network.hpp"

namespace amod {

// TNTP ingestion: `net_text` follows the <NUMBER OF NODES>/<NUMBER OF LINKS>
// metadata-plus-rows format, `trips_text` the "Origin n" block format.
// Arc order preserves file order; one request per nonzero off-diagonal OD
// entry. Values are transcribed literally (no unit conversion).
std::pair<Network, RequestSet> parse_tntp(const std::string& net_text,
                                          const std::string& trips_text);

Network parse_tntp_net(const std::string& net_text);
RequestSet parse_tntp_trips(const std::string& trips_text, int num_vertices);

std::string serialize_tntp_net(const Network& net);
std::string serialize_tntp_trips(const RequestSet& requests, int num_vertices);

// JSON network schema: {"nodes": N, "arcs": [{"tail","head","t0","capacity",
// "alpha"?, "beta"?}]}
Network parse_network_json(const std::string& json_text);
std::string serialize_network_json(const Network& net);

// Request JSON schema: [{"o","d","alpha","class"?}]
RequestSet parse_requests_json(const std::string& json_text);
std::string serialize_requests_json(const RequestSet& requests);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// FNV-1a over the canonical serialization; used to key catalog cache files.
std::uint64_t fnv1a(const std::string& text);
std::uint64_t network_hash(const Network& net);
std::uint64_t requests_hash(const RequestSet& requests);

}  // namespace amod
