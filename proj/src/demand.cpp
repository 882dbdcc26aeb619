#include "amod/demand.hpp"

#include <set>
#include <stdexcept>

namespace amod {

std::string to_string(RequestClass c) {
    switch (c) {
        case RequestClass::private_vehicle: return "private";
        case RequestClass::amod_individual: return "individual";
        case RequestClass::amod_poolable: return "poolable";
    }
    return "?";
}

void validate_requests(const RequestSet& requests, int num_vertices) {
    for (const Request& r : requests) {
        if (r.origin < 1 || r.origin > num_vertices || r.destination < 1 ||
            r.destination > num_vertices)
            throw std::invalid_argument("request references unknown node " +
                                        std::to_string(r.origin) + "->" +
                                        std::to_string(r.destination));
        if (r.destination == r.origin)
            throw std::invalid_argument("request with destination equal to origin " +
                                        std::to_string(r.origin));
        if (!(r.rate > 0.0)) throw std::invalid_argument("request with nonpositive rate");
    }
}

Matrix build_demand_matrix(const RequestSet& requests, int num_vertices) {
    validate_requests(requests, num_vertices);
    std::set<std::pair<int, int>> seen;
    Matrix d(num_vertices, num_vertices);
    for (const Request& r : requests) {
        if (!seen.insert({r.origin, r.destination}).second)
            throw std::invalid_argument("duplicate OD pair " + std::to_string(r.origin) + "->" +
                                        std::to_string(r.destination) + " in request set");
        d(r.destination - 1, r.origin - 1) += r.rate;
    }
    for (int j = 0; j < num_vertices; ++j) {
        double col = 0.0;
        for (int i = 0; i < num_vertices; ++i)
            if (i != j) col += d(i, j);
        d(j, j) = -col;
    }
    return d;
}

DemandSplit split_by_penetration(const RequestSet& requests, double phi, double psi) {
    if (phi < 0.0 || phi > 1.0 || psi < 0.0 || psi > 1.0)
        throw std::invalid_argument("penetration rates must lie in [0,1]");
    DemandSplit out;
    for (const Request& r : requests) {
        const double p = (1.0 - phi) * r.rate;
        const double i = phi * (1.0 - psi) * r.rate;
        const double s = phi * psi * r.rate;
        if (p > kMinRequestRate)
            out.private_requests.push_back(
                {r.origin, r.destination, p, RequestClass::private_vehicle});
        if (i > kMinRequestRate)
            out.amod_individual.push_back(
                {r.origin, r.destination, i, RequestClass::amod_individual});
        if (s > kMinRequestRate)
            out.amod_poolable.push_back({r.origin, r.destination, s, RequestClass::amod_poolable});
    }
    return out;
}

RequestSet downsize(RequestSet requests, double factor) {
    if (!(factor > 0.0) || factor > 1.0)
        throw std::invalid_argument("downsize factor must lie in (0,1]");
    for (Request& r : requests) r.rate *= factor;
    return requests;
}

double total_rate(const RequestSet& requests) {
    double s = 0.0;
    for (const Request& r : requests) s += r.rate;
    return s;
}

}  // namespace amod
