//! Hierarchical `domain.cluster.node` addressing and the tree-shaped network
//! every simulation runs on.
//!
//! The wired nodes form a single rooted tree; mobile hosts hang off their
//! current point of attachment through one wireless link. Routing is static
//! tree routing, so every path is unique.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::Strategy;

/// Deepest level a wired node may sit at (root is level 0).
pub const MAX_WIRED_LEVEL: u32 = 3;

/// Three-component hierarchical address. Ordering is lexicographic on
/// `(domain, cluster, node)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct HierAddress {
    pub domain: u16,
    pub cluster: u16,
    pub node: u16,
}

impl HierAddress {
    pub const fn new(domain: u16, cluster: u16, node: u16) -> Self {
        Self {
            domain,
            cluster,
            node,
        }
    }
}

impl fmt::Display for HierAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.domain, self.cluster, self.node)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddressParseError {
    #[error("address `{text}` has {found} components, expected 3 (domain.cluster.node)")]
    ComponentCount { text: String, found: usize },
    #[error("address `{text}`: {component} component `{value}` is not a non-negative integer")]
    BadComponent {
        text: String,
        component: &'static str,
        value: String,
    },
}

const COMPONENT_NAMES: [&str; 3] = ["domain", "cluster", "node"];

impl FromStr for HierAddress {
    type Err = AddressParseError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = text.split('.').collect();
        if parts.len() != 3 {
            return Err(AddressParseError::ComponentCount {
                text: text.to_string(),
                found: parts.len(),
            });
        }
        let mut out = [0u16; 3];
        for (i, part) in parts.iter().enumerate() {
            // Reject signs and padding so that render(parse(s)) == s.
            let canonical = !part.is_empty()
                && part.bytes().all(|b| b.is_ascii_digit())
                && (part.len() == 1 || !part.starts_with('0'));
            out[i] = match part.parse::<u16>() {
                Ok(v) if canonical => v,
                _ => {
                    return Err(AddressParseError::BadComponent {
                        text: text.to_string(),
                        component: COMPONENT_NAMES[i],
                        value: part.to_string(),
                    })
                }
            };
        }
        Ok(HierAddress::new(out[0], out[1], out[2]))
    }
}

impl TryFrom<String> for HierAddress {
    type Error = AddressParseError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<HierAddress> for String {
    fn from(value: HierAddress) -> Self {
        value.to_string()
    }
}

/// Parses the `d.c.n` text form.
pub fn parse_address(text: &str) -> Result<HierAddress, AddressParseError> {
    text.parse()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Router,
    HomeAgent,
    ForeignAgent,
    CorrespondentHost,
    MobileHost,
}

impl NodeKind {
    pub fn is_wired(self) -> bool {
        self != NodeKind::MobileHost
    }

    pub fn is_mobility_agent(self) -> bool {
        matches!(self, NodeKind::HomeAgent | NodeKind::ForeignAgent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopologyNode {
    pub address: HierAddress,
    pub parent: Option<HierAddress>,
    pub kind: NodeKind,
    pub level: u32,
}

/// Unordered endpoint pair, stored smallest-first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkKey(HierAddress, HierAddress);

impl LinkKey {
    pub fn new(a: HierAddress, b: HierAddress) -> Self {
        if a <= b {
            LinkKey(a, b)
        } else {
            LinkKey(b, a)
        }
    }

    pub fn endpoints(&self) -> (HierAddress, HierAddress) {
        (self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub delay: Duration,
    /// Bits per second.
    pub bandwidth: u64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            delay: Duration::from_millis(20),
            bandwidth: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    pub endpoints: (HierAddress, HierAddress),
    pub delay: Duration,
    pub bandwidth: u64,
    pub wireless: bool,
}

impl Link {
    /// Time to clock `wire_bytes` onto the link.
    pub fn serialization(&self, wire_bytes: u32) -> Duration {
        let nanos = (wire_bytes as u128 * 8 * 1_000_000_000) / self.bandwidth as u128;
        Duration::from_nanos(nanos as u64)
    }

    /// Propagation plus serialization for one packet on an idle link.
    pub fn latency(&self, wire_bytes: u32) -> Duration {
        self.delay + self.serialization(wire_bytes)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error(transparent)]
    Address(#[from] AddressParseError),
    #[error("node {0} already exists")]
    DuplicateNode(HierAddress),
    #[error("unknown node {0}")]
    UnknownNode(HierAddress),
    #[error("topology already has root {existing}; {rejected} cannot also be a root")]
    MultipleRoots {
        existing: HierAddress,
        rejected: HierAddress,
    },
    #[error("topology has no root")]
    NoRoot,
    #[error("node {node} would sit at level {level}; wired depth is limited to {MAX_WIRED_LEVEL}")]
    DepthExceeded { node: HierAddress, level: u32 },
    #[error("link {0}-{1} would create a cycle")]
    CycleRejected(HierAddress, HierAddress),
    #[error("link {0}-{1}: delay and bandwidth must be positive")]
    InvalidLink(HierAddress, HierAddress),
    #[error("node {node}: parent {parent} must be a wired node")]
    BadParent {
        node: HierAddress,
        parent: HierAddress,
    },
    #[error("mobile host {0} cannot be the root or have children")]
    MobileHostPlacement(HierAddress),
    #[error("{node} has only {available} ancestor level(s), {requested} requested")]
    InsufficientDepth {
        node: HierAddress,
        requested: u32,
        available: u32,
    },
    #[error("invalid topology file: {0}")]
    Config(String),
}

/// The routing substrate: a rooted tree of wired nodes plus mobile hosts
/// attached by wireless links.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: BTreeMap<HierAddress, TopologyNode>,
    links: BTreeMap<LinkKey, Link>,
    root: Option<HierAddress>,
    defaults: LinkParams,
}

impl Topology {
    pub fn new(defaults: LinkParams) -> Self {
        Self {
            nodes: BTreeMap::new(),
            links: BTreeMap::new(),
            root: None,
            defaults,
        }
    }

    pub fn link_defaults(&self) -> LinkParams {
        self.defaults
    }

    /// Adds a node; `parent == None` makes it the root. The parent link is
    /// created with the default parameters (wireless for mobile hosts).
    pub fn add_node(
        &mut self,
        address: HierAddress,
        parent: Option<HierAddress>,
        kind: NodeKind,
    ) -> Result<(), TopologyError> {
        if self.nodes.contains_key(&address) {
            return Err(TopologyError::DuplicateNode(address));
        }
        let level = match parent {
            None => {
                if kind == NodeKind::MobileHost {
                    return Err(TopologyError::MobileHostPlacement(address));
                }
                if let Some(existing) = self.root {
                    return Err(TopologyError::MultipleRoots {
                        existing,
                        rejected: address,
                    });
                }
                0
            }
            Some(p) => {
                let parent_node = self.nodes.get(&p).ok_or(TopologyError::UnknownNode(p))?;
                if !parent_node.kind.is_wired() {
                    return Err(TopologyError::BadParent {
                        node: address,
                        parent: p,
                    });
                }
                parent_node.level + 1
            }
        };
        if kind.is_wired() && level > MAX_WIRED_LEVEL {
            return Err(TopologyError::DepthExceeded {
                node: address,
                level,
            });
        }
        self.nodes.insert(
            address,
            TopologyNode {
                address,
                parent,
                kind,
                level,
            },
        );
        match parent {
            None => self.root = Some(address),
            Some(p) => {
                self.links.insert(
                    LinkKey::new(p, address),
                    Link {
                        endpoints: (p, address),
                        delay: self.defaults.delay,
                        bandwidth: self.defaults.bandwidth,
                        wireless: kind == NodeKind::MobileHost,
                    },
                );
            }
        }
        Ok(())
    }

    /// Overrides the parameters of an existing parent/child link. Any other
    /// pair of existing nodes is rejected because the tree is already
    /// connected, so a new link would close a cycle.
    pub fn set_link(
        &mut self,
        a: HierAddress,
        b: HierAddress,
        params: LinkParams,
        wireless: Option<bool>,
    ) -> Result<(), TopologyError> {
        for n in [a, b] {
            if !self.nodes.contains_key(&n) {
                return Err(TopologyError::UnknownNode(n));
            }
        }
        if params.delay.is_zero() || params.bandwidth == 0 {
            return Err(TopologyError::InvalidLink(a, b));
        }
        // Only the mobile host's attachment may be wireless.
        let touches_mobile = [a, b]
            .iter()
            .any(|n| self.nodes[n].kind == NodeKind::MobileHost);
        if wireless.is_some_and(|w| w != touches_mobile) {
            return Err(TopologyError::InvalidLink(a, b));
        }
        let link = self
            .links
            .get_mut(&LinkKey::new(a, b))
            .ok_or(TopologyError::CycleRejected(a, b))?;
        link.delay = params.delay;
        link.bandwidth = params.bandwidth;
        if let Some(w) = wireless {
            link.wireless = w;
        }
        Ok(())
    }

    pub fn root(&self) -> Result<HierAddress, TopologyError> {
        self.root.ok_or(TopologyError::NoRoot)
    }

    pub fn node(&self, addr: HierAddress) -> Result<&TopologyNode, TopologyError> {
        self.nodes
            .get(&addr)
            .ok_or(TopologyError::UnknownNode(addr))
    }

    pub fn contains(&self, addr: HierAddress) -> bool {
        self.nodes.contains_key(&addr)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TopologyNode> {
        self.nodes.values()
    }

    pub fn links(&self) -> impl Iterator<Item = &Link> {
        self.links.values()
    }

    pub fn link(&self, a: HierAddress, b: HierAddress) -> Option<&Link> {
        self.links.get(&LinkKey::new(a, b))
    }

    pub fn children(&self, addr: HierAddress) -> impl Iterator<Item = HierAddress> + '_ {
        self.nodes
            .values()
            .filter(move |n| n.parent == Some(addr))
            .map(|n| n.address)
    }

    /// Moves a mobile host's wireless link to `new_parent`, keeping the
    /// link parameters. This is the only structural mutation after load.
    pub fn reattach(
        &mut self,
        mobile: HierAddress,
        new_parent: HierAddress,
    ) -> Result<(), TopologyError> {
        let parent_level = {
            let p = self.node(new_parent)?;
            if !p.kind.is_wired() {
                return Err(TopologyError::BadParent {
                    node: mobile,
                    parent: new_parent,
                });
            }
            p.level
        };
        let node = self.node(mobile)?;
        if node.kind != NodeKind::MobileHost {
            return Err(TopologyError::MobileHostPlacement(mobile));
        }
        let old_parent = node
            .parent
            .ok_or(TopologyError::MobileHostPlacement(mobile))?;
        if old_parent == new_parent {
            return Ok(());
        }
        let mut link = self
            .links
            .remove(&LinkKey::new(old_parent, mobile))
            .expect("mobile host always has a wireless link");
        link.endpoints = (new_parent, mobile);
        self.links.insert(LinkKey::new(new_parent, mobile), link);
        let node = self.nodes.get_mut(&mobile).expect("checked above");
        node.parent = Some(new_parent);
        node.level = parent_level + 1;
        Ok(())
    }

    /// Follows `levels` parent pointers upward from `addr`.
    pub fn ancestor_above(
        &self,
        addr: HierAddress,
        levels: u32,
    ) -> Result<HierAddress, TopologyError> {
        let mut cur = self.node(addr)?;
        for walked in 0..levels {
            match cur.parent {
                Some(p) => cur = self.node(p)?,
                None => {
                    return Err(TopologyError::InsufficientDepth {
                        node: addr,
                        requested: levels,
                        available: walked,
                    })
                }
            }
        }
        Ok(cur.address)
    }

    fn chain_to_root(&self, addr: HierAddress) -> Result<Vec<HierAddress>, TopologyError> {
        let mut chain = vec![addr];
        let mut cur = self.node(addr)?;
        while let Some(p) = cur.parent {
            chain.push(p);
            cur = self.node(p)?;
        }
        Ok(chain)
    }

    /// The unique tree path from `from` to `to`, both endpoints included.
    pub fn shortest_path(
        &self,
        from: HierAddress,
        to: HierAddress,
    ) -> Result<Vec<HierAddress>, TopologyError> {
        let up = self.chain_to_root(from)?;
        let down = self.chain_to_root(to)?;
        // Strip the common suffix (shared ancestors) down to the meeting node.
        let mut i = up.len();
        let mut j = down.len();
        while i > 0 && j > 0 && up[i - 1] == down[j - 1] {
            i -= 1;
            j -= 1;
        }
        // Both chains end at the root, so up[i] == down[j] is the meeting node.
        let mut path: Vec<HierAddress> = up[..=i].to_vec();
        path.extend(down[..j].iter().rev());
        Ok(path)
    }

    /// Next node on the tree path from `from` toward `to`.
    pub fn next_hop(
        &self,
        from: HierAddress,
        to: HierAddress,
    ) -> Result<Option<HierAddress>, TopologyError> {
        Ok(self.shortest_path(from, to)?.get(1).copied())
    }

    /// Data path from a correspondent to a mobile host registered at `coa`,
    /// routed via the strategy's interception point.
    ///
    /// ```
    /// use mipsim::topology::{LinkParams, Topology};
    /// use mipsim::Strategy;
    ///
    /// let topo = Topology::reference(LinkParams::default());
    /// let a = |s: &str| s.parse().unwrap();
    /// let route = topo
    ///     .strategy_route(a("0.0.0"), a("1.2.0"), a("1.5.0"), Strategy::OriginalMip)
    ///     .unwrap();
    /// let text: Vec<String> = route.iter().map(|n| n.to_string()).collect();
    /// assert_eq!(text.join(" "), "0.0.0 1.0.0 1.1.0 1.2.0 1.1.0 1.0.0 1.4.0 1.5.0");
    /// ```
    pub fn strategy_route(
        &self,
        cn: HierAddress,
        ha: HierAddress,
        coa: HierAddress,
        strategy: Strategy,
    ) -> Result<Vec<HierAddress>, TopologyError> {
        self.node(coa)?;
        if coa == ha {
            return self.shortest_path(cn, ha);
        }
        let anchor = self.ancestor_above(ha, strategy.levels_above())?;
        let mut path = self.shortest_path(cn, anchor)?;
        let tail = self.shortest_path(anchor, coa)?;
        path.extend_from_slice(&tail[1..]);
        Ok(path)
    }
}

/// Number of edges in a node path.
pub fn hop_count(path: &[HierAddress]) -> usize {
    path.len().saturating_sub(1)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologyFile {
    #[serde(default)]
    defaults: Option<LinkDefaultsRecord>,
    #[serde(rename = "node", default)]
    nodes: Vec<NodeRecord>,
    #[serde(rename = "link", default)]
    links: Vec<LinkRecord>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkDefaultsRecord {
    delay: Option<f64>,
    bandwidth: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    address: String,
    parent: String,
    kind: NodeKind,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkRecord {
    a: String,
    b: String,
    delay: Option<f64>,
    bandwidth: Option<u64>,
    wireless: Option<bool>,
}

fn positive_secs(v: f64, a: HierAddress, b: HierAddress) -> Result<Duration, TopologyError> {
    if v.is_finite() && v > 0.0 {
        Ok(Duration::from_secs_f64(v))
    } else {
        Err(TopologyError::InvalidLink(a, b))
    }
}

impl Topology {
    /// Loads a topology file. Nodes may appear in any order as long as
    /// every parent is declared somewhere in the file.
    ///
    /// `defaults` applies to links the file does not override; a
    /// `[defaults]` table in the file takes precedence over it.
    pub fn from_toml_str(text: &str, defaults: LinkParams) -> Result<Self, TopologyError> {
        let file: TopologyFile =
            toml::from_str(text).map_err(|e| TopologyError::Config(e.to_string()))?;
        let mut defaults = defaults;
        if let Some(d) = &file.defaults {
            if let Some(delay) = d.delay {
                if !(delay.is_finite() && delay > 0.0) {
                    return Err(TopologyError::Config(format!(
                        "default delay {delay} must be positive"
                    )));
                }
                defaults.delay = Duration::from_secs_f64(delay);
            }
            if let Some(bw) = d.bandwidth {
                if bw == 0 {
                    return Err(TopologyError::Config(
                        "default bandwidth must be positive".into(),
                    ));
                }
                defaults.bandwidth = bw;
            }
        }

        let mut pending = Vec::with_capacity(file.nodes.len());
        for rec in &file.nodes {
            let addr: HierAddress = rec.address.parse()?;
            let parent = if rec.parent == "root" {
                None
            } else {
                Some(rec.parent.parse::<HierAddress>()?)
            };
            pending.push((addr, parent, rec.kind));
        }

        let mut topo = Topology::new(defaults);
        // Insert parents before children regardless of file order.
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for (addr, parent, kind) in pending {
                match parent {
                    Some(p) if !topo.contains(p) => rest.push((addr, parent, kind)),
                    _ => topo.add_node(addr, parent, kind)?,
                }
            }
            if rest.len() == before {
                let (addr, parent, _) = rest[0];
                return match parent {
                    Some(p) if rest.iter().any(|(a, _, _)| *a == p) => {
                        Err(TopologyError::CycleRejected(addr, p))
                    }
                    Some(p) => Err(TopologyError::UnknownNode(p)),
                    None => unreachable!("roots never wait"),
                };
            }
            pending = rest;
        }
        topo.root()?;

        for rec in &file.links {
            let a: HierAddress = rec.a.parse()?;
            let b: HierAddress = rec.b.parse()?;
            let existing = topo.link(a, b).cloned().ok_or_else(|| {
                if topo.contains(a) && topo.contains(b) {
                    TopologyError::CycleRejected(a, b)
                } else if topo.contains(a) {
                    TopologyError::UnknownNode(b)
                } else {
                    TopologyError::UnknownNode(a)
                }
            })?;
            let delay = match rec.delay {
                Some(d) => positive_secs(d, a, b)?,
                None => existing.delay,
            };
            let bandwidth = rec.bandwidth.unwrap_or(existing.bandwidth);
            topo.set_link(a, b, LinkParams { delay, bandwidth }, rec.wireless)?;
        }
        Ok(topo)
    }

    pub fn from_file(path: &std::path::Path, defaults: LinkParams) -> Result<Self, TopologyError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TopologyError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, defaults)
    }

    /// The reconstructed hierarchy shipped in `configs/hierarchy.toml`.
    pub fn reference(defaults: LinkParams) -> Self {
        Self::from_toml_str(REFERENCE_TOPOLOGY, defaults)
            .expect("bundled reference topology is valid")
    }
}

/// Text of the bundled reference topology file.
pub const REFERENCE_TOPOLOGY: &str = include_str!("../configs/hierarchy.toml");

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> HierAddress {
        s.parse().unwrap()
    }

    fn reference() -> Topology {
        Topology::reference(LinkParams::default())
    }

    fn path(s: &str) -> Vec<HierAddress> {
        s.split_whitespace().map(a).collect()
    }

    #[test]
    fn parse_examples() {
        assert_eq!(a("1.2.1"), HierAddress::new(1, 2, 1));
        assert_eq!(a("0.0.0"), HierAddress::new(0, 0, 0));
        assert_eq!(
            parse_address("1.2"),
            Err(AddressParseError::ComponentCount {
                text: "1.2".into(),
                found: 2
            })
        );
    }

    #[test]
    fn parse_names_offending_component() {
        let err = parse_address("1.x.0").unwrap_err();
        assert!(err.to_string().contains("cluster"), "{err}");
        let err = parse_address("1.2.-3").unwrap_err();
        assert!(err.to_string().contains("node"), "{err}");
        assert!(parse_address("01.2.3").is_err());
        assert!(parse_address("+1.2.3").is_err());
        assert!(parse_address("1..3").is_err());
    }

    #[test]
    fn ordering_is_lexicographic() {
        assert!(a("0.9.9") < a("1.0.0"));
        assert!(a("1.2.0") < a("1.10.0"));
        assert!(a("1.2.0") < a("1.2.1"));
    }

    #[test]
    fn ancestor_examples() {
        let t = reference();
        assert_eq!(t.ancestor_above(a("1.2.0"), 2).unwrap(), a("1.0.0"));
        assert_eq!(t.ancestor_above(a("1.2.0"), 1).unwrap(), a("1.1.0"));
        assert_eq!(t.ancestor_above(a("1.2.0"), 0).unwrap(), a("1.2.0"));
        assert_eq!(
            t.ancestor_above(a("0.0.0"), 1),
            Err(TopologyError::InsufficientDepth {
                node: a("0.0.0"),
                requested: 1,
                available: 0
            })
        );
        match t.ancestor_above(a("1.2.0"), 5) {
            Err(TopologyError::InsufficientDepth { available, .. }) => assert_eq!(available, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shortest_path_examples() {
        let t = reference();
        assert_eq!(
            t.shortest_path(a("0.0.0"), a("1.5.0")).unwrap(),
            path("0.0.0 1.0.0 1.4.0 1.5.0")
        );
        assert_eq!(
            t.shortest_path(a("1.2.0"), a("1.2.0")).unwrap(),
            path("1.2.0")
        );
        assert_eq!(
            t.shortest_path(a("1.2.0"), a("0.2.1")).unwrap(),
            path("1.2.0 1.1.0 1.0.0 0.0.0 0.2.0 0.2.1")
        );
        assert_eq!(
            t.shortest_path(a("1.2.0"), a("9.9.9")),
            Err(TopologyError::UnknownNode(a("9.9.9")))
        );
    }

    #[test]
    fn strategy_route_examples() {
        let t = reference();
        let (cn, ha, coa) = (a("0.0.0"), a("1.2.0"), a("1.5.0"));
        assert_eq!(
            t.strategy_route(cn, ha, coa, Strategy::OriginalMip)
                .unwrap(),
            path("0.0.0 1.0.0 1.1.0 1.2.0 1.1.0 1.0.0 1.4.0 1.5.0")
        );
        assert_eq!(
            t.strategy_route(cn, ha, coa, Strategy::TwoLevelUp).unwrap(),
            path("0.0.0 1.0.0 1.4.0 1.5.0")
        );
        assert_eq!(
            t.strategy_route(cn, ha, coa, Strategy::OneLevelUp).unwrap(),
            path("0.0.0 1.0.0 1.1.0 1.0.0 1.4.0 1.5.0")
        );
        for s in Strategy::ALL {
            assert_eq!(
                t.strategy_route(cn, ha, ha, s).unwrap(),
                path("0.0.0 1.0.0 1.1.0 1.2.0")
            );
        }
    }

    #[test]
    fn rejects_structural_violations() {
        let mut t = Topology::new(LinkParams::default());
        t.add_node(a("0.0.0"), None, NodeKind::Router).unwrap();
        assert!(matches!(
            t.add_node(a("0.0.1"), None, NodeKind::Router),
            Err(TopologyError::MultipleRoots { .. })
        ));
        t.add_node(a("0.1.0"), Some(a("0.0.0")), NodeKind::Router)
            .unwrap();
        t.add_node(a("0.2.0"), Some(a("0.1.0")), NodeKind::Router)
            .unwrap();
        t.add_node(a("0.3.0"), Some(a("0.2.0")), NodeKind::Router)
            .unwrap();
        assert!(matches!(
            t.add_node(a("0.4.0"), Some(a("0.3.0")), NodeKind::Router),
            Err(TopologyError::DepthExceeded { level: 4, .. })
        ));
        // A mobile host may hang below the deepest wired level.
        t.add_node(a("0.3.1"), Some(a("0.3.0")), NodeKind::MobileHost)
            .unwrap();
        assert_eq!(
            t.set_link(a("0.0.0"), a("0.2.0"), LinkParams::default(), None),
            Err(TopologyError::CycleRejected(a("0.0.0"), a("0.2.0")))
        );
        assert!(matches!(
            t.set_link(
                a("0.0.0"),
                a("0.1.0"),
                LinkParams {
                    delay: Duration::ZERO,
                    bandwidth: 1
                },
                None
            ),
            Err(TopologyError::InvalidLink(..))
        ));
        assert_eq!(
            t.add_node(a("0.3.2"), Some(a("0.3.1")), NodeKind::Router),
            Err(TopologyError::BadParent {
                node: a("0.3.2"),
                parent: a("0.3.1")
            })
        );
    }

    #[test]
    fn reference_structure() {
        let t = reference();
        assert_eq!(t.root().unwrap(), a("0.0.0"));
        let roots = t.nodes().filter(|n| n.parent.is_none()).count();
        assert_eq!(roots, 1);
        for n in t.nodes() {
            if let Some(p) = n.parent {
                assert_eq!(n.level, t.node(p).unwrap().level + 1);
                assert!(t.link(p, n.address).is_some());
            }
        }
        // One link per parent/child relation.
        assert_eq!(t.links().count(), t.nodes().count() - 1);
        let wireless: Vec<_> = t.links().filter(|l| l.wireless).collect();
        assert_eq!(wireless.len(), 1);
        assert_eq!(wireless[0].endpoints, (a("1.2.0"), a("1.2.1")));
        assert_eq!(t.node(a("1.2.0")).unwrap().kind, NodeKind::HomeAgent);
        for fa in ["1.3.0", "1.5.0", "0.2.1", "0.1.0"] {
            assert_eq!(t.node(a(fa)).unwrap().kind, NodeKind::ForeignAgent);
        }
    }

    #[test]
    fn reattach_moves_wireless_link() {
        let mut t = reference();
        t.reattach(a("1.2.1"), a("1.5.0")).unwrap();
        assert!(t.link(a("1.2.0"), a("1.2.1")).is_none());
        let l = t.link(a("1.5.0"), a("1.2.1")).unwrap();
        assert!(l.wireless);
        assert_eq!(t.node(a("1.2.1")).unwrap().parent, Some(a("1.5.0")));
        assert_eq!(t.links().filter(|l| l.wireless).count(), 1);
    }

    #[test]
    fn file_loader_errors() {
        let d = LinkParams::default();
        let orphan = r#"
            [[node]]
            address = "0.0.0"
            parent = "root"
            kind = "router"
            [[node]]
            address = "0.1.0"
            parent = "0.9.0"
            kind = "router"
        "#;
        assert_eq!(
            Topology::from_toml_str(orphan, d),
            Err(TopologyError::UnknownNode(a("0.9.0")))
        );
        let extra_link = format!("{REFERENCE_TOPOLOGY}\n[[link]]\na = \"1.3.0\"\nb = \"1.5.0\"\n");
        assert_eq!(
            Topology::from_toml_str(&extra_link, d),
            Err(TopologyError::CycleRejected(a("1.3.0"), a("1.5.0")))
        );
        let override_link = format!(
            "{REFERENCE_TOPOLOGY}\n[[link]]\na = \"1.4.0\"\nb = \"1.5.0\"\ndelay = 0.005\n"
        );
        let t = Topology::from_toml_str(&override_link, d).unwrap();
        assert_eq!(
            t.link(a("1.5.0"), a("1.4.0")).unwrap().delay,
            Duration::from_millis(5)
        );
    }

    #[test]
    fn latency_arithmetic() {
        let t = reference();
        let l = t.link(a("0.0.0"), a("1.0.0")).unwrap();
        assert_eq!(l.serialization(220), Duration::from_micros(880));
        assert_eq!(l.latency(220), Duration::from_micros(20_880));
        assert_eq!(l.latency(240), Duration::from_micros(20_960));
    }
}
