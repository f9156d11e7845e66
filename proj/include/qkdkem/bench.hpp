#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "qkdkem/handshake.hpp"
#include "qkdkem/hybrid.hpp"
#include "qkdkem/kme.hpp"

namespace qkdkem::bench {

struct BenchConfig {
    std::vector<std::string> suites = {"mock256"};
    std::vector<hybrid::Flow> flows = {hybrid::Flow::client_initiated};
    std::vector<hybrid::Api> apis = {hybrid::Api::etsi014};
    int iterations = 50;
    int warmup = 5;
    kme::LatencyModel latency{};
    uint64_t seed = 0;
    int parallel = 1;  // handshake bench: concurrent workers (opt-in)
};

// How the benchmark reaches its KMEs. in_process spawns a pair and calls it
// directly; http_spawn serves the pair on loopback HTTP; external targets an
// already-running pair at the two base URLs.
struct KmeMode {
    enum class Kind { in_process, http_spawn, external } kind = Kind::in_process;
    std::string url_a;
    std::string url_b;
};

struct Record {
    std::string suite;
    std::string flow;   // "client" | "server" | "baseline"
    std::string api;    // "etsi014" | "etsi004" | "none"
    std::string phase;  // "keygen" | "encaps" | "decaps" | "handshake"
    int iteration = 0;
    double duration_us = 0;
};

struct SummaryRow {
    std::string suite, flow, api, phase;
    int n = 0;
    double mean_us = 0;
    double std_us = 0;
};

struct Result {
    std::vector<Record> records;
    std::vector<SummaryRow> summary;
};

// Isolated KEM-operation timings: a pure-KEM baseline cell per suite plus one
// hybrid cell per requested (flow, api). Warmup iterations are not recorded.
Result bench_ops(const BenchConfig& config, const KmeMode& mode);

// Full handshake timings through run_handshake, baseline and hybrid cells.
Result bench_handshake(const BenchConfig& config, const KmeMode& mode);

std::vector<SummaryRow> summarize(const std::vector<Record>& records);

// CSV columns: suite,flow,api,phase,iteration,duration_us. Throws empty_run
// when there is nothing to write.
void emit_csv(const std::vector<Record>& records, std::ostream& out);

// Comparison table: one row per benched cell with baseline mean/std and
// hybrid mean/std in milliseconds.
void emit_table(const Result& result, std::ostream& out);

}  // namespace qkdkem::bench
