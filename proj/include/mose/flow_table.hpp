#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace mose {

struct FiveTuple {
    std::string src_ip;
    std::uint16_t src_port = 0;
    std::string dst_ip;
    std::uint16_t dst_port = 0;
    std::string protocol = "tcp";

    friend auto operator<=>(const FiveTuple&, const FiveTuple&) = default;
};

std::string to_string(const FiveTuple& t);

/// Overlay forwarding state: connection -> egress endpoint.
class FlowTable {
public:
    using Entries = std::map<FiveTuple, std::string>;

    FlowTable() = default;
    explicit FlowTable(Entries entries) : entries_(std::move(entries)) {}

    void install(const FiveTuple& conn, std::string egress) { entries_[conn] = std::move(egress); }
    const std::string* egress(const FiveTuple& conn) const;
    const Entries& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    friend bool operator==(const FlowTable&, const FlowTable&) = default;

private:
    Entries entries_;
};

/// New table with `conn` redirected to `new_egress`; throws MissingFlowError
/// when the connection has no entry.
FlowTable update_flow(const FlowTable& table, const FiveTuple& conn, const std::string& new_egress);

/// Shared table whose readers always see a complete snapshot: writers build
/// the redirected copy aside and swap it in.
class SharedFlowTable {
public:
    explicit SharedFlowTable(FlowTable initial = {});

    std::shared_ptr<const FlowTable> snapshot() const;
    void redirect(const FiveTuple& conn, const std::string& new_egress);

private:
    mutable std::mutex mutex_;
    std::shared_ptr<const FlowTable> current_;
};

}  // namespace mose
