#pragma once

#include <string>
#include <vector>

#include "amod/matrix.hpp"

namespace amod {

enum class RequestClass { private_vehicle, amod_individual, amod_poolable };

std::string to_string(RequestClass c);

// Travel request: `rate` users per hour from origin to destination.
struct Request {
    int origin = 0;
    int destination = 0;
    double rate = 0.0;  // [users/h]
    RequestClass cls = RequestClass::private_vehicle;
};

using RequestSet = std::vector<Request>;

// Rates below this are dropped after splitting so the pooling pair catalog
// stays small.
inline constexpr double kMinRequestRate = 1e-9;

void validate_requests(const RequestSet& requests, int num_vertices);

// Demand matrix: entry (i,j) carries the rate of requests j -> i; each
// diagonal entry balances its column so every column sums to zero.
Matrix build_demand_matrix(const RequestSet& requests, int num_vertices);

struct DemandSplit {
    RequestSet private_requests;
    RequestSet amod_individual;
    RequestSet amod_poolable;
};

// Deterministic rate-scaling split: each request is copied into the three
// classes with rates (1-phi)*a, phi*(1-psi)*a, phi*psi*a. Zero-rate copies
// are dropped.
DemandSplit split_by_penetration(const RequestSet& requests, double phi, double psi);

RequestSet downsize(RequestSet requests, double factor);

double total_rate(const RequestSet& requests);

}  // namespace amod
