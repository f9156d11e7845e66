#include "qkdkem/handshake.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>
#include <random>
#include <thread>

#include "qkdkem/crypto.hpp"
#include "qkdkem/errors.hpp"

namespace qkdkem::handshake {

// ---------------------------------------------------------------------------
// Group catalog
// ---------------------------------------------------------------------------

hybrid::HybridSuite GroupEntry::suite() const {
    if (kind != Kind::hybrid) {
        raise(Errc::invalid_suite, "group " + name + " is not a hybrid group");
    }
    return hybrid::HybridSuite::make(kem_name, *api, *flow, code);
}

void GroupCatalog::add(const GroupEntry& entry) {
    if (entries_.contains(entry.code)) {
        raise(Errc::invalid_config, "duplicate group codepoint");
    }
    if (entry.kind == GroupEntry::Kind::hybrid) {
        if (!entry.api || !entry.flow) {
            raise(Errc::invalid_config, "hybrid group needs api and flow");
        }
        hybrid::HybridSuite::make(entry.kem_name, *entry.api, *entry.flow, entry.code);
    } else {
        kem::require_kem(entry.kem_name);
    }
    entries_.emplace(entry.code, entry);
}

const GroupEntry* GroupCatalog::find(uint16_t code) const {
    auto it = entries_.find(code);
    return it == entries_.end() ? nullptr : &it->second;
}

const GroupEntry* GroupCatalog::find_by_name(std::string_view name) const {
    for (const auto& [code, entry] : entries_) {
        if (entry.name == name) return &entry;
    }
    return nullptr;
}

std::optional<uint16_t> GroupCatalog::find_hybrid(std::string_view kem_name,
                                                  hybrid::Flow flow,
                                                  hybrid::Api api) const {
    for (const auto& [code, entry] : entries_) {
        if (entry.kind == GroupEntry::Kind::hybrid && entry.kem_name == kem_name &&
            entry.flow == flow && entry.api == api) {
            return code;
        }
    }
    return std::nullopt;
}

std::optional<uint16_t> GroupCatalog::find_kem_only(std::string_view kem_name) const {
    for (const auto& [code, entry] : entries_) {
        if (entry.kind == GroupEntry::Kind::kem_only && entry.kem_name == kem_name) {
            return code;
        }
    }
    return std::nullopt;
}

std::vector<uint16_t> GroupCatalog::codes() const {
    std::vector<uint16_t> out;
    out.reserve(entries_.size());
    for (const auto& [code, entry] : entries_) out.push_back(code);
    return out;
}

GroupCatalog GroupCatalog::defaults() {
    GroupCatalog catalog;
    catalog.add({kGroupMock256KemOnly, "mock256", GroupEntry::Kind::kem_only, "mock256",
                 std::nullopt, std::nullopt});
    catalog.add({kGroupMock256Client014, "qkd_mock256", GroupEntry::Kind::hybrid, "mock256",
                 hybrid::Api::etsi014, hybrid::Flow::client_initiated});
    catalog.add({kGroupMock256Client004, "qkd_mock256_004", GroupEntry::Kind::hybrid,
                 "mock256", hybrid::Api::etsi004, hybrid::Flow::client_initiated});
    catalog.add({kGroupMock256Server014, "qkd_mock256_srv", GroupEntry::Kind::hybrid,
                 "mock256", hybrid::Api::etsi014, hybrid::Flow::server_initiated});
    return catalog;
}

// ---------------------------------------------------------------------------
// Wire frames
// ---------------------------------------------------------------------------

namespace {

constexpr size_t kMaxFramePayload = 1 << 20;

void put_u16(Bytes& out, uint16_t v) {
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

void put_u32(Bytes& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

struct Reader {
    ByteView data;
    size_t pos = 0;

    uint8_t u8() {
        need(1);
        return data[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(data[pos]) << 8 | data[pos + 1];
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = uint32_t(data[pos]) << 24 | uint32_t(data[pos + 1]) << 16 |
                     uint32_t(data[pos + 2]) << 8 | data[pos + 3];
        pos += 4;
        return v;
    }
    Bytes take(size_t n) {
        need(n);
        Bytes out(data.begin() + pos, data.begin() + pos + n);
        pos += n;
        return out;
    }
    void need(size_t n) const {
        if (pos + n > data.size()) raise(Errc::malformed_payload, "truncated frame");
    }
    bool done() const { return pos == data.size(); }
};

}  // namespace

Bytes encode_frame(const Frame& frame) {
    if (frame.payload.size() > kMaxFramePayload) {
        raise(Errc::malformed_payload, "frame payload too large");
    }
    Bytes out;
    out.reserve(4 + 3 + frame.payload.size());
    put_u32(out, uint32_t(3 + frame.payload.size()));
    out.push_back(uint8_t(frame.type));
    put_u16(out, frame.group);
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

Frame decode_frame(ByteView wire) {
    Reader r{wire};
    uint32_t length = r.u32();
    if (length < 3 || length > kMaxFramePayload + 3 || wire.size() != size_t(length) + 4) {
        raise(Errc::malformed_payload, "bad frame length");
    }
    Frame frame;
    uint8_t type = r.u8();
    if (type < 1 || type > 3) raise(Errc::malformed_payload, "unknown frame type");
    frame.type = FrameType(type);
    frame.group = r.u16();
    frame.payload = r.take(length - 3);
    return frame;
}

Bytes encode_client_hello(const ClientHello& hello) {
    Bytes out;
    put_u16(out, uint16_t(hello.supported_groups.size()));
    for (uint16_t g : hello.supported_groups) put_u16(out, g);
    put_u16(out, uint16_t(hello.key_shares.size()));
    for (const auto& [group, share] : hello.key_shares) {
        put_u16(out, group);
        put_u32(out, uint32_t(share.size()));
        out.insert(out.end(), share.begin(), share.end());
    }
    return out;
}

ClientHello decode_client_hello(ByteView payload) {
    Reader r{payload};
    ClientHello hello;
    uint16_t ngroups = r.u16();
    hello.supported_groups.reserve(ngroups);
    for (uint16_t i = 0; i < ngroups; ++i) hello.supported_groups.push_back(r.u16());
    uint16_t nshares = r.u16();
    for (uint16_t i = 0; i < nshares; ++i) {
        uint16_t group = r.u16();
        uint32_t len = r.u32();
        hello.key_shares[group] = r.take(len);
    }
    if (!r.done()) raise(Errc::malformed_payload, "trailing bytes in client hello");
    return hello;
}

Bytes encode_alert(Errc code, std::string_view message) {
    Bytes out;
    std::string_view token = errc_token(code);
    out.push_back(uint8_t(token.size()));
    out.insert(out.end(), token.begin(), token.end());
    out.insert(out.end(), message.begin(), message.end());
    return out;
}

std::pair<Errc, std::string> decode_alert(ByteView payload) {
    Reader r{payload};
    uint8_t token_len = r.u8();
    Bytes token = r.take(token_len);
    Bytes message = r.take(payload.size() - 1 - token_len);
    return {errc_from_token(std::string_view(reinterpret_cast<const char*>(token.data()),
                                             token.size())),
            std::string(message.begin(), message.end())};
}

// ---------------------------------------------------------------------------
// Secret digest
// ---------------------------------------------------------------------------

namespace {

std::array<uint8_t, 32> transcript_digest(uint16_t group, ByteView hello_wire,
                                          ByteView server_payload, ByteView secret) {
    Bytes input;
    const char* label = "hybrid-hs-v1";
    input.insert(input.end(), label, label + std::strlen(label));
    put_u16(input, group);
    put_u32(input, uint32_t(hello_wire.size()));
    input.insert(input.end(), hello_wire.begin(), hello_wire.end());
    put_u32(input, uint32_t(server_payload.size()));
    input.insert(input.end(), server_payload.begin(), server_payload.end());
    input.insert(input.end(), secret.begin(), secret.end());
    return crypto::sha256(input);
}

Bytes next_seed(std::mt19937_64& rng) {
    Bytes out(32);
    for (size_t i = 0; i < 4; ++i) {
        uint64_t v = rng();
        for (int j = 0; j < 8; ++j) out[8 * i + j] = uint8_t(v >> (8 * j));
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

Client::Client(const GroupCatalog& catalog, hybrid::QkdBinding binding, uint64_t seed)
    : catalog_(&catalog), binding_(std::move(binding)), seed_(seed) {}

ClientHello Client::start(const std::vector<uint16_t>& preferences) {
    if (preferences.empty()) raise(Errc::empty_preference, "no groups offered");
    std::mt19937_64 rng(seed_);
    ClientHello hello;
    hello.supported_groups = preferences;
    for (uint16_t code : preferences) {
        const GroupEntry* entry = catalog_->find(code);
        if (entry == nullptr) {
            raise(Errc::invalid_config, "preference not in catalog: " + std::to_string(code));
        }
        Bytes seed_bytes = next_seed(rng);
        if (entry->kind == GroupEntry::Kind::kem_only) {
            const kem::Kem& kem = kem::require_kem(entry->kem_name);
            auto kp = kem.keypair(seed_bytes);
            hello.key_shares[code] = kp.pk;
            kem_only_keypairs_.emplace(code, std::move(kp));
        } else {
            auto [it, inserted] =
                contexts_.emplace(code, hybrid::Context(entry->suite(), binding_));
            hello.key_shares[code] = it->second.keygen(seed_bytes).encode();
        }
    }
    offered_ = preferences;
    hello_wire_ = encode_client_hello(hello);
    return hello;
}

hybrid::Secret Client::finish(const ServerHello& server_hello) {
    uint16_t code = server_hello.selected_group;
    if (std::find(offered_.begin(), offered_.end(), code) == offered_.end()) {
        raise(Errc::selected_group_not_offered, "server selected an unoffered group");
    }
    const GroupEntry* entry = catalog_->find(code);
    if (entry == nullptr) {
        raise(Errc::selected_group_not_offered, "selected group unknown to client");
    }
    hybrid::Secret secret;
    if (entry->kind == GroupEntry::Kind::kem_only) {
        const kem::Kem& kem = kem::require_kem(entry->kem_name);
        secret.bytes = kem.decaps(kem_only_keypairs_.at(code).sk, server_hello.payload);
        secret.pq_len = secret.bytes.size();
    } else {
        secret = contexts_.at(code).decaps(server_hello.payload);
    }
    digest_ = transcript_digest(code, hello_wire_, server_hello.payload, secret.bytes);
    return secret;
}

void Client::close() {
    for (auto& [code, ctx] : contexts_) ctx.close();
}

// ---------------------------------------------------------------------------
// Server
// ---------------------------------------------------------------------------

Server::Server(const GroupCatalog& catalog, hybrid::QkdBinding binding, uint64_t seed,
               std::optional<std::vector<uint16_t>> enabled_groups)
    : catalog_(&catalog), binding_(std::move(binding)), seed_(seed),
      enabled_(std::move(enabled_groups)) {}

bool Server::supports(uint16_t code) const {
    if (catalog_->find(code) == nullptr) return false;
    if (!enabled_) return true;
    return std::find(enabled_->begin(), enabled_->end(), code) != enabled_->end();
}

std::pair<ServerHello, hybrid::Secret> Server::respond(const ClientHello& hello) {
    // first client-preferred group this server supports; no QKD key is
    // consumed unless the hybrid exchange actually proceeds
    const GroupEntry* entry = nullptr;
    for (uint16_t code : hello.supported_groups) {
        if (supports(code)) {
            entry = catalog_->find(code);
            break;
        }
    }
    if (entry == nullptr) {
        raise(Errc::unsupported_group, "no mutually supported group");
    }
    auto share_it = hello.key_shares.find(entry->code);
    if (share_it == hello.key_shares.end()) {
        raise(Errc::malformed_payload, "offered group carries no key share");
    }
    std::mt19937_64 rng(seed_);
    Bytes randomness = next_seed(rng);

    ServerHello out;
    out.selected_group = entry->code;
    hybrid::Secret secret;
    if (entry->kind == GroupEntry::Kind::kem_only) {
        const kem::Kem& kem = kem::require_kem(entry->kem_name);
        auto res = kem.encaps(share_it->second, randomness);
        out.payload = std::move(res.ct);
        secret.bytes = std::move(res.ss);
        secret.pq_len = secret.bytes.size();
    } else {
        context_.emplace(entry->suite(), binding_);
        auto [ct, sec] = context_->encaps(share_it->second, randomness);
        out.payload = ct.encode();
        secret = std::move(sec);
    }
    digest_ = transcript_digest(entry->code, encode_client_hello(hello), out.payload,
                                secret.bytes);
    return {std::move(out), std::move(secret)};
}

void Server::close() {
    if (context_) context_->close();
}

// ---------------------------------------------------------------------------
// Handshake driver
// ---------------------------------------------------------------------------

const PhaseMark* Transcript::phase(std::string_view name) const {
    for (const auto& mark : phases) {
        if (mark.phase == name) return &mark;
    }
    return nullptr;
}

double Transcript::total_ms() const {
    double total = 0;
    for (const auto& mark : phases) total += mark.duration_ms();
    return total;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Minimal loopback TCP pair for the socket wire mode.
struct Socket {
    int fd = -1;

    Socket() = default;
    explicit Socket(int f) : fd(f) {}
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    Socket(Socket&& other) noexcept : fd(other.fd) { other.fd = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            reset();
            fd = other.fd;
            other.fd = -1;
        }
        return *this;
    }
    ~Socket() { reset(); }

    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

struct Listener {
    Socket sock;
    uint16_t port = 0;

    Listener() {
        sock = Socket(::socket(AF_INET, SOCK_STREAM, 0));
        if (sock.fd < 0) raise(Errc::bind_failure, "socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        if (::bind(sock.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            raise(Errc::bind_failure, "bind() failed");
        }
        socklen_t len = sizeof(addr);
        ::getsockname(sock.fd, reinterpret_cast<sockaddr*>(&addr), &len);
        port = ntohs(addr.sin_port);
        if (::listen(sock.fd, 1) != 0) raise(Errc::bind_failure, "listen() failed");
    }

    Socket accept_one() {
        int fd = ::accept(sock.fd, nullptr, nullptr);
        if (fd < 0) raise(Errc::transport, "accept() failed");
        return Socket(fd);
    }
};

Socket connect_loopback(uint16_t port) {
    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (sock.fd < 0) raise(Errc::transport, "socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::connect(sock.fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        raise(Errc::transport, "connect() failed");
    }
    return sock;
}

void write_all(const Socket& sock, ByteView data) {
    size_t sent = 0;
    while (sent < data.size()) {
        ssize_t n = ::send(sock.fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
        if (n <= 0) raise(Errc::transport, "send() failed");
        sent += size_t(n);
    }
}

Bytes read_exact(const Socket& sock, size_t n) {
    Bytes out(n);
    size_t got = 0;
    while (got < n) {
        ssize_t r = ::recv(sock.fd, out.data() + got, n - got, 0);
        if (r <= 0) raise(Errc::transport, "peer closed mid-frame");
        got += size_t(r);
    }
    return out;
}

Frame read_frame(const Socket& sock) {
    Bytes header = read_exact(sock, 4);
    uint32_t length = uint32_t(header[0]) << 24 | uint32_t(header[1]) << 16 |
                      uint32_t(header[2]) << 8 | header[3];
    if (length < 3 || length > kMaxFramePayload + 3) {
        raise(Errc::malformed_payload, "bad frame length");
    }
    Bytes body = read_exact(sock, length);
    Bytes whole = header;
    whole.insert(whole.end(), body.begin(), body.end());
    return decode_frame(whole);
}

struct ServerSideOutcome {
    std::optional<ServerHello> hello;
    std::optional<std::array<uint8_t, 32>> digest;
    PhaseMark mark;
    bool mark_started = false;
    std::optional<Errc> error_code;
    std::string error;
};

void maybe_tamper(Bytes& payload, const RunConfig& config, bool& tampered) {
    if (config.tamper_probability <= 0 || payload.empty()) return;
    std::mt19937_64 rng(config.tamper_seed);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    if (coin(rng) >= config.tamper_probability) return;
    std::uniform_int_distribution<size_t> pick(0, payload.size() - 1);
    std::uniform_int_distribution<int> bit(0, 7);
    payload[pick(rng)] ^= uint8_t(1 << bit(rng));
    tampered = true;
}

}  // namespace

Transcript run_handshake(const RunConfig& config) {
    Transcript transcript;
    Client client(config.catalog, config.client_binding, config.seed);
    Server server(config.catalog, config.server_binding, config.seed + 0x9e3779b97f4a7c15ull,
                  config.server_groups);

    auto ledger_pos = [&]() -> uint64_t {
        return config.store ? config.store->ledger_size() : 0;
    };
    uint64_t run_ledger_start = ledger_pos();
    Clock::time_point t0 = Clock::now();

    auto run_phase = [&](const std::string& name, auto&& fn) {
        PhaseMark mark;
        mark.phase = name;
        mark.ledger_begin = ledger_pos();
        mark.start_ms = ms_since(t0);
        fn();
        mark.end_ms = ms_since(t0);
        mark.ledger_end = ledger_pos();
        transcript.phases.push_back(mark);
    };

    bool tampered = false;
    try {
        ClientHello hello;
        run_phase("keygen", [&] { hello = client.start(config.client_prefs); });
        transcript.client_hello_wire = client.hello_wire();

        ServerHello server_hello;
        if (config.wire == RunConfig::WireMode::socket) {
            Listener listener;
            ServerSideOutcome outcome;
            std::thread server_thread([&] {
                Socket conn;
                try {
                    conn = listener.accept_one();
                    Frame frame = read_frame(conn);
                    if (frame.type != FrameType::client_hello) {
                        raise(Errc::malformed_payload, "expected client hello frame");
                    }
                    ClientHello received = decode_client_hello(frame.payload);
                    outcome.mark.phase = "encaps";
                    outcome.mark.ledger_begin = ledger_pos();
                    outcome.mark.start_ms = ms_since(t0);
                    outcome.mark_started = true;
                    auto [sh, secret] = server.respond(received);
                    outcome.mark.end_ms = ms_since(t0);
                    outcome.mark.ledger_end = ledger_pos();
                    outcome.hello = sh;
                    outcome.digest = server.secret_digest();
                    write_all(conn, encode_frame(Frame{FrameType::server_hello,
                                                       sh.selected_group, sh.payload}));
                } catch (const Error& e) {
                    outcome.error_code = e.code();
                    outcome.error = e.what();
                    if (outcome.mark_started) {
                        outcome.mark.end_ms = ms_since(t0);
                        outcome.mark.ledger_end = ledger_pos();
                    }
                    if (conn.fd >= 0) {
                        try {
                            write_all(conn, encode_frame(Frame{FrameType::alert, 0,
                                                               encode_alert(e.code(), e.what())}));
                        } catch (...) {
                        }
                    }
                }
            });
            // client side of the exchange
            std::optional<Errc> client_error_code;
            std::string client_error;
            try {
                Socket conn = connect_loopback(listener.port);
                write_all(conn, encode_frame(Frame{FrameType::client_hello, 0,
                                                   encode_client_hello(hello)}));
                Frame reply = read_frame(conn);
                if (reply.type == FrameType::alert) {
                    auto [code, message] = decode_alert(reply.payload);
                    client_error_code = code;
                    client_error = message;
                } else if (reply.type != FrameType::server_hello) {
                    client_error_code = Errc::malformed_payload;
                    client_error = "unexpected frame type";
                } else {
                    server_hello.selected_group = reply.group;
                    server_hello.payload = reply.payload;
                }
            } catch (const Error& e) {
                client_error_code = e.code();
                client_error = e.what();
            }
            server_thread.join();
            if (outcome.mark_started) transcript.phases.push_back(outcome.mark);
            if (outcome.error_code) raise(*outcome.error_code, outcome.error);
            if (client_error_code) raise(*client_error_code, client_error);
            transcript.server_digest = outcome.digest;
        } else {
            run_phase("encaps", [&] {
                auto [sh, secret] = server.respond(hello);
                server_hello = std::move(sh);
                (void)secret;
            });
            transcript.server_digest = server.secret_digest();
        }

        transcript.negotiated_group = server_hello.selected_group;
        maybe_tamper(server_hello.payload, config, tampered);
        transcript.server_hello_wire = encode_frame(
            Frame{FrameType::server_hello, server_hello.selected_group, server_hello.payload});

        run_phase("decaps", [&] { (void)client.finish(server_hello); });
        transcript.client_digest = client.secret_digest();
    } catch (const Error& e) {
        transcript.error = e.what();
    }

    // 004 streams close at teardown; the ledger excerpt includes those entries
    client.close();
    server.close();

    transcript.success = transcript.error.empty() && transcript.client_digest &&
                         transcript.server_digest &&
                         *transcript.client_digest == *transcript.server_digest;
    if (!transcript.success && transcript.error.empty()) {
        transcript.error = tampered ? "secret digests differ (payload tampered)"
                                    : "secret digests differ";
    }

    if (config.store) {
        for (const auto& entry : config.store->ledger_snapshot()) {
            if (entry.seq >= run_ledger_start) transcript.ledger.push_back(entry);
        }
    }
    return transcript;
}

hybrid::QkdCallCounts qkd_call_count(const Transcript& transcript) {
    auto count_window = [&](const PhaseMark* mark) {
        if (mark == nullptr) return 0;
        int count = 0;
        for (const auto& entry : transcript.ledger) {
            if (entry.seq >= mark->ledger_begin && entry.seq < mark->ledger_end &&
                entry.op != "CLOSE") {
                ++count;
            }
        }
        return count;
    };
    hybrid::QkdCallCounts counts;
    counts.keygen = count_window(transcript.phase("keygen"));
    counts.encaps = count_window(transcript.phase("encaps"));
    counts.decaps = count_window(transcript.phase("decaps"));
    return counts;
}

}  // namespace qkdkem::handshake
