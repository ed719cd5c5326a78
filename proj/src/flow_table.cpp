#include "mose/flow_table.hpp"

#include "mose/errors.hpp"

namespace mose {

std::string to_string(const FiveTuple& t)
{
    return t.protocol + ":" + t.src_ip + ":" + std::to_string(t.src_port) + "->" + t.dst_ip + ":" +
           std::to_string(t.dst_port);
}

const std::string* FlowTable::egress(const FiveTuple& conn) const
{
    auto it = entries_.find(conn);
    return it == entries_.end() ? nullptr : &it->second;
}

FlowTable update_flow(const FlowTable& table, const FiveTuple& conn, const std::string& new_egress)
{
    if (!table.egress(conn))
        throw MissingFlowError("no flow entry for " + to_string(conn));
    FlowTable::Entries entries = table.entries();
    entries[conn] = new_egress;
    return FlowTable(std::move(entries));
}

SharedFlowTable::SharedFlowTable(FlowTable initial)
    : current_(std::make_shared<const FlowTable>(std::move(initial)))
{
}

std::shared_ptr<const FlowTable> SharedFlowTable::snapshot() const
{
    std::lock_guard lock(mutex_);
    return current_;
}

void SharedFlowTable::redirect(const FiveTuple& conn, const std::string& new_egress)
{
    std::lock_guard lock(mutex_);
    current_ = std::make_shared<const FlowTable>(update_flow(*current_, conn, new_egress));
}

}  // namespace mose
