#include "mose/bus.hpp"

#include <stdexcept>

namespace mose {

std::string_view to_string(Role r)
{
    switch (r) {
    case Role::Source: return "source";
    case Role::Destination: return "destination";
    case Role::Client: return "client";
    case Role::Orchestrator: return "orchestrator";
    }
    return "?";
}

std::string_view to_string(MessageKind k)
{
    switch (k) {
    case MessageKind::Publish: return "publish";
    case MessageKind::Query: return "query";
    case MessageKind::Reply: return "reply";
    }
    return "?";
}

std::string make_topic(std::string_view task_id, Role role, std::string_view step)
{
    std::string t = "mose/";
    t += task_id;
    t += '/';
    t += to_string(role);
    t += '/';
    t += step;
    return t;
}

namespace {

std::vector<std::string_view> segments(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find('/', start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

bool topic_matches(std::string_view pattern, std::string_view topic)
{
    const auto p = segments(pattern);
    const auto t = segments(topic);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == "**")
            return i + 1 == p.size() && t.size() >= i;
        if (i >= t.size())
            return false;
        if (p[i] != "*" && p[i] != t[i])
            return false;
    }
    return p.size() == t.size();
}

std::optional<std::pair<std::string, BusMessage>> QueueTransport::pop()
{
    if (queue_.empty())
        return std::nullopt;
    auto front = std::move(queue_.front());
    queue_.pop_front();
    return front;
}

void Bus::subscribe(const std::string& agent, std::string pattern)
{
    subscriptions_.emplace_back(agent, std::move(pattern));
}

void Bus::declare_queryable(const std::string& agent, std::string pattern)
{
    queryables_.emplace_back(agent, std::move(pattern));
}

std::vector<std::string> Bus::send(BusMessage& message)
{
    if (message.topic.empty())
        throw std::invalid_argument("bus: empty topic");
    std::vector<std::string> recipients;
    switch (message.kind) {
    case MessageKind::Publish:
        for (const auto& [agent, pattern] : subscriptions_) {
            if (agent == message.sender || !topic_matches(pattern, message.topic))
                continue;
            bool dup = false;
            for (const auto& r : recipients)
                dup = dup || r == agent;
            if (!dup)
                recipients.push_back(agent);
        }
        break;
    case MessageKind::Query:
        for (const auto& [agent, pattern] : queryables_) {
            if (topic_matches(pattern, message.topic)) {
                recipients.push_back(agent);
                break;
            }
        }
        break;
    case MessageKind::Reply: {
        auto it = query_origin_.find(message.correlation_id);
        if (it == query_origin_.end())
            throw std::invalid_argument("bus: reply correlates with no query");
        recipients.push_back(it->second);
        break;
    }
    }

    if (message.kind == MessageKind::Query) {
        if (message.correlation_id.empty())
            message.correlation_id = message.sender + "#q" + std::to_string(next_id_);
        if (!query_origin_.emplace(message.correlation_id, message.sender).second)
            throw std::invalid_argument("bus: correlation id reused: " + message.correlation_id);
    }
    // Rejected messages never consume an id.
    message.id = next_id_++;
    for (const auto& r : recipients)
        transport_.send(r, message);
    return recipients;
}

}  // namespace mose
