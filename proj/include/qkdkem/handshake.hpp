#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qkdkem/errors.hpp"
#include "qkdkem/hybrid.hpp"
#include "qkdkem/kme.hpp"

namespace qkdkem::handshake {

/// A negotiable group: either a hybrid suite or a plain KEM group (the
/// baseline / classical placeholder slot).
struct GroupEntry {
    enum class Kind { kem_only, hybrid };

    uint16_t code = 0;
    std::string name;
    Kind kind = Kind::kem_only;
    std::string kem_name;
    std::optional<hybrid::Api> api;    // hybrid only
    std::optional<hybrid::Flow> flow;  // hybrid only

    hybrid::HybridSuite suite() const;  // hybrid entries only
};

class GroupCatalog {
public:
    // Validates codepoint uniqueness and the hybrid flow/API constraint.
    void add(const GroupEntry& entry);

    const GroupEntry* find(uint16_t code) const;
    const GroupEntry* find_by_name(std::string_view name) const;
    std::optional<uint16_t> find_hybrid(std::string_view kem_name, hybrid::Flow flow,
                                        hybrid::Api api) const;
    std::optional<uint16_t> find_kem_only(std::string_view kem_name) const;
    std::vector<uint16_t> codes() const;
    bool contains(uint16_t code) const { return find(code) != nullptr; }

    // 0x3030 mock256 (KEM only) plus the hybrid groups 0x303C (client/014),
    // 0x303D (client/004) and 0x303E (server/014).
    static GroupCatalog defaults();

private:
    std::map<uint16_t, GroupEntry> entries_;
};

inline constexpr uint16_t kGroupMock256KemOnly = 0x3030;
inline constexpr uint16_t kGroupMock256Client014 = 0x303C;
inline constexpr uint16_t kGroupMock256Client004 = 0x303D;
inline constexpr uint16_t kGroupMock256Server014 = 0x303E;

struct ClientHello {
    std::vector<uint16_t> supported_groups;    // preference order
    std::map<uint16_t, Bytes> key_shares;      // group -> encoded public payload
};

struct ServerHello {
    uint16_t selected_group = 0;
    Bytes payload;  // encoded hybrid ciphertext (or raw KEM ciphertext)
};

// ---- wire frames (loopback sockets or in-process channels) ----
// frame = u32 length (big-endian, excludes itself) || type u8 || group u16 BE || payload.
// Byte layouts are documented in docs/PROTOCOL.md.
enum class FrameType : uint8_t { client_hello = 1, server_hello = 2, alert = 3 };

struct Frame {
    FrameType type = FrameType::alert;
    uint16_t group = 0;
    Bytes payload;
};

Bytes encode_frame(const Frame& frame);
Frame decode_frame(ByteView wire);  // throws malformed_payload

Bytes encode_client_hello(const ClientHello& hello);
ClientHello decode_client_hello(ByteView payload);

Bytes encode_alert(Errc code, std::string_view message);
std::pair<Errc, std::string> decode_alert(ByteView payload);

/// Client side of the key-establishment handshake. start() performs keygen
/// for every offered group (client-initiated groups consume QKD material
/// right here, before server support is known).
class Client {
public:
    Client(const GroupCatalog& catalog, hybrid::QkdBinding binding, uint64_t seed);

    ClientHello start(const std::vector<uint16_t>& preferences);
    hybrid::Secret finish(const ServerHello& server_hello);

    const Bytes& hello_wire() const { return hello_wire_; }
    std::optional<std::array<uint8_t, 32>> secret_digest() const { return digest_; }
    void close();

private:
    const GroupCatalog* catalog_;
    hybrid::QkdBinding binding_;
    uint64_t seed_;
    std::vector<uint16_t> offered_;
    std::map<uint16_t, hybrid::Context> contexts_;        // hybrid groups
    std::map<uint16_t, kem::Keypair> kem_only_keypairs_;  // baseline groups
    Bytes hello_wire_;
    std::optional<std::array<uint8_t, 32>> digest_;
};

/// Server side: selects the first client-preferred group it supports, then
/// encapsulates. No QKD key is touched unless a hybrid group was agreed.
class Server {
public:
    Server(const GroupCatalog& catalog, hybrid::QkdBinding binding, uint64_t seed,
           std::optional<std::vector<uint16_t>> enabled_groups = {});

    std::pair<ServerHello, hybrid::Secret> respond(const ClientHello& hello);

    std::optional<std::array<uint8_t, 32>> secret_digest() const { return digest_; }
    void close();

private:
    bool supports(uint16_t code) const;

    const GroupCatalog* catalog_;
    hybrid::QkdBinding binding_;
    uint64_t seed_;
    std::optional<std::vector<uint16_t>> enabled_;
    std::optional<hybrid::Context> context_;
    std::optional<std::array<uint8_t, 32>> digest_;
};

struct PhaseMark {
    std::string phase;  // "keygen" | "encaps" | "decaps"
    double start_ms = 0;
    double end_ms = 0;
    uint64_t ledger_begin = 0;
    uint64_t ledger_end = 0;

    double duration_ms() const { return end_ms - start_ms; }
};

struct Transcript {
    bool success = false;
    std::string error;
    uint16_t negotiated_group = 0;
    Bytes client_hello_wire;
    Bytes server_hello_wire;
    std::optional<std::array<uint8_t, 32>> client_digest;
    std::optional<std::array<uint8_t, 32>> server_digest;
    std::vector<PhaseMark> phases;
    std::vector<kme::LedgerEntry> ledger;  // excerpt covering this run

    const PhaseMark* phase(std::string_view name) const;
    double total_ms() const;
};

struct RunConfig {
    GroupCatalog catalog = GroupCatalog::defaults();
    std::vector<uint16_t> client_prefs;
    std::optional<std::vector<uint16_t>> server_groups;
    hybrid::QkdBinding client_binding;
    hybrid::QkdBinding server_binding;
    std::shared_ptr<kme::KmeStore> store;  // enables ledger marks when set
    uint64_t seed = 0;

    enum class WireMode { in_process, socket } wire = WireMode::in_process;

    // Test hook: probability of flipping one random byte of the ServerHello
    // payload in flight.
    double tamper_probability = 0.0;
    uint64_t tamper_seed = 0;
};

// Drives keygen -> encaps -> decaps over the chosen wire, records per-phase
// wall-clock marks and ledger windows, and reports success only when both
// transcript-bound secret digests exist and match.
Transcript run_handshake(const RunConfig& config);

// Ledger-derived QKD round trips per phase (CLOSE and GET_STATUS excluded).
hybrid::QkdCallCounts qkd_call_count(const Transcript& transcript);

}  // namespace qkdkem::handshake
