//! robots.txt evaluation, limited to the question "may the landing page be
//! scanned at all".

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobotsDecision {
    Allow,
    Deny,
}

#[derive(Debug, Default)]
struct Group {
    agents: Vec<String>,
    disallow_root: bool,
    allow_root: bool,
}

fn parse_groups(text: &str) -> Vec<Group> {
    let mut groups: Vec<Group> = Vec::new();
    let mut in_agents = false;
    for line in text.lines() {
        let line = line.split('#').next().unwrap_or("").trim();
        let Some((key, value)) = line.split_once(':') else {
            continue;
        };
        let value = value.trim();
        match key.trim().to_ascii_lowercase().as_str() {
            "user-agent" => {
                if !in_agents {
                    groups.push(Group::default());
                    in_agents = true;
                }
                groups.last_mut().unwrap().agents.push(value.to_ascii_lowercase());
            }
            "disallow" | "allow" if !groups.is_empty() => {
                in_agents = false;
                let g = groups.last_mut().unwrap();
                let root = value == "/" || value == "/*";
                if key.trim().eq_ignore_ascii_case("disallow") {
                    g.disallow_root |= root;
                } else {
                    g.allow_root |= root;
                }
            }
            _ => in_agents = false,
        }
    }
    groups
}

/// Groups naming the scanner's product token take precedence over `*`.
/// The site is denied when the chosen groups disallow `/` without also
/// allowing it.
pub fn evaluate_robots(text: &str, scanner_token: &str) -> RobotsDecision {
    let token = scanner_token.to_ascii_lowercase();
    let groups = parse_groups(text);
    let specific: Vec<&Group> = groups
        .iter()
        .filter(|g| g.agents.iter().any(|a| a != "*" && !a.is_empty() && token.contains(a.as_str())))
        .collect();
    let chosen = if specific.is_empty() {
        groups.iter().filter(|g| g.agents.iter().any(|a| a == "*")).collect()
    } else {
        specific
    };
    let disallow = chosen.iter().any(|g| g.disallow_root);
    let allow = chosen.iter().any(|g| g.allow_root);
    if disallow && !allow {
        RobotsDecision::Deny
    } else {
        RobotsDecision::Allow
    }
}
