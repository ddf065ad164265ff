#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rav/sim_time.hpp"

namespace rav {

/// Tiled many-core layout: `tiles` compute tiles of `pes_per_tile` cores each.
struct Topology {
    int tiles = 8;
    int pes_per_tile = 4;

    int total_pes() const { return tiles * pes_per_tile; }

    void validate() const {
        if (tiles < 1 || pes_per_tile < 1)
            throw std::invalid_argument("Topology: tiles and pes_per_tile must be >= 1");
    }
};

struct ResourceRequest {
    int pe_count = 1;
    std::string requester;

    void validate() const {
        if (pe_count < 1)
            throw std::invalid_argument("ResourceRequest: pe_count must be >= 1");
    }
};

enum class ClaimState { invaded, infected, retreated };

/// A set of granted PEs with invade/infect/retreat lifecycle state.
/// A zero-PE claim is a legal invade result; it cannot be infected.
struct ResourceClaim {
    std::vector<int> granted_pes;
    ClaimState state = ClaimState::invaded;
    std::string owner;

    int size() const { return static_cast<int>(granted_pes.size()); }
    bool empty() const { return granted_pes.empty(); }
};

struct LoadTraceEntry {
    SimTime time = 0;  // microseconds
    int busy_pes = 0;
};

/// Step-function background load. With a positive duration the trace repeats
/// cyclically past its end; with duration 0 the last entry holds forever.
/// Before the first entry the load is zero.
struct LoadTrace {
    std::vector<LoadTraceEntry> entries;
    SimTime duration = 0;

    int busy_at(SimTime now) const {
        if (entries.empty()) return 0;
        SimTime t = now;
        if (duration > 0) {
            t = now % duration;
            if (t < 0) t += duration;
        }
        int busy = 0;
        for (const auto& e : entries) {
            if (e.time > t) break;
            busy = e.busy_pes;
        }
        return busy;
    }

    int max_busy() const {
        int m = 0;
        for (const auto& e : entries) m = std::max(m, e.busy_pes);
        return m;
    }

    void validate() const {
        SimTime prev = -1;
        for (const auto& e : entries) {
            if (e.time <= prev)
                throw std::invalid_argument("LoadTrace: times must be strictly increasing");
            if (e.busy_pes < 0)
                throw std::invalid_argument("LoadTrace: negative busy_pes");
            prev = e.time;
        }
        if (duration != 0 && !entries.empty() && duration <= entries.back().time)
            throw std::invalid_argument("LoadTrace: duration must exceed last entry time");
    }
};

/// Parallel efficiency eta(n): fraction of ideal linear speedup at n PEs.
/// Defaults to 1/(1 + gamma*(n-1)); a per-count table overrides the formula.
struct EtaModel {
    double gamma = 0.02;
    std::map<int, double> table;

    double operator()(int n_pes) const {
        if (n_pes < 1)
            throw std::invalid_argument("EtaModel: n_pes must be >= 1");
        auto it = table.find(n_pes);
        if (it != table.end()) return it->second;
        return 1.0 / (1.0 + gamma * (n_pes - 1));
    }
};

/// Abstract work to be charged against a claim: `work_units` units at
/// `cost_per_unit_ms` milliseconds per unit on one PE.
struct Workload {
    double work_units = 0.0;
    double cost_per_unit_ms = 0.0;
};

class LifecycleError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// infect-phase: charge a workload to a claim. Simulated duration is
/// work/(n*eta(n)); never measured from wall clock. The claim stays usable
/// for further infect calls until it retreats.
inline SimTime infect(ResourceClaim& claim, const Workload& workload, const EtaModel& eta) {
    if (claim.state == ClaimState::retreated)
        throw LifecycleError("infect: claim already retreated");
    if (claim.empty())
        throw LifecycleError("infect: zero-PE claim cannot be infected");
    const int n = claim.size();
    const double ms = workload.work_units * workload.cost_per_unit_ms / (n * eta(n));
    claim.state = ClaimState::infected;
    return us_from_ms(ms);
}

/// The simulated many-core: owns the PE pool, the background-load trace and
/// the live-claim bookkeeping. Single logical timeline; not thread-safe.
class Runtime {
public:
    Runtime(Topology topo, LoadTrace trace, EtaModel eta = {}, int max_grantable_pes = -1)
        : topo_(topo), trace_(std::move(trace)), eta_(eta),
          max_grantable_(max_grantable_pes < 0 ? topo.total_pes() : max_grantable_pes),
          pe_claimed_(static_cast<std::size_t>(topo.total_pes()), false) {
        topo_.validate();
        trace_.validate();
        if (trace_.max_busy() > topo_.total_pes())
            throw std::invalid_argument("Runtime: trace busy_pes exceeds topology total");
    }

    const Topology& topology() const { return topo_; }
    const EtaModel& eta() const { return eta_; }
    const LoadTrace& trace() const { return trace_; }
    int max_grantable_pes() const { return max_grantable_; }
    int claimed_pes() const { return claimed_count_; }

    /// PEs neither background-busy nor held by a live claim. Background load
    /// never preempts granted claims, so this clamps at zero when the trace
    /// rises above the remaining capacity.
    int idle_pes(SimTime now) const {
        const int idle = topo_.total_pes() - trace_.busy_at(now) - claimed_count_;
        return std::max(0, idle);
    }

    /// invade-phase: grants min(requested, idle, max_grantable) PEs.
    /// A zero-PE grant is a legal outcome, not an error.
    ResourceClaim invade(const ResourceRequest& request, SimTime now) {
        request.validate();
        const int want = std::min({request.pe_count, idle_pes(now), max_grantable_});
        ResourceClaim claim;
        claim.owner = request.requester;
        claim.state = ClaimState::invaded;
        claim.granted_pes = pick_pes(want);
        for (int pe : claim.granted_pes) pe_claimed_[static_cast<std::size_t>(pe)] = true;
        claimed_count_ += claim.size();
        return claim;
    }

    SimTime infect(ResourceClaim& claim, const Workload& workload) const {
        return rav::infect(claim, workload, eta_);
    }

    /// retreat-phase: returns all PEs to the pool. Terminal; a second call
    /// is an error.
    int retreat(ResourceClaim& claim) {
        if (claim.state == ClaimState::retreated)
            throw LifecycleError("retreat: claim already retreated");
        for (int pe : claim.granted_pes) pe_claimed_[static_cast<std::size_t>(pe)] = false;
        claimed_count_ -= claim.size();
        claim.state = ClaimState::retreated;
        return claim.size();
    }

private:
    // Grant policy: fill whole tiles first (tiles with the most free PEs),
    // ties broken by lowest tile index, then lowest PE index within the tile.
    std::vector<int> pick_pes(int want) {
        std::vector<int> picked;
        if (want <= 0) return picked;
        picked.reserve(static_cast<std::size_t>(want));
        std::vector<std::pair<int, int>> tile_free;  // (free count, tile)
        for (int t = 0; t < topo_.tiles; ++t) {
            int free = 0;
            for (int p = 0; p < topo_.pes_per_tile; ++p)
                if (!pe_claimed_[static_cast<std::size_t>(t * topo_.pes_per_tile + p)]) ++free;
            if (free > 0) tile_free.emplace_back(free, t);
        }
        std::sort(tile_free.begin(), tile_free.end(),
                  [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                  });
        for (const auto& [free, t] : tile_free) {
            for (int p = 0; p < topo_.pes_per_tile && static_cast<int>(picked.size()) < want; ++p) {
                const int pe = t * topo_.pes_per_tile + p;
                if (!pe_claimed_[static_cast<std::size_t>(pe)]) picked.push_back(pe);
            }
            if (static_cast<int>(picked.size()) == want) break;
        }
        return picked;
    }

    Topology topo_;
    LoadTrace trace_;
    EtaModel eta_;
    int max_grantable_;
    std::vector<bool> pe_claimed_;
    int claimed_count_ = 0;
};

}  // namespace rav
