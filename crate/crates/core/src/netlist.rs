// SPDX-License-Identifier: Apache-2.0

//! Structural netlists: modules with ports, nets and instances.
//!
//! A module with neither nets nor instances is a leaf (a library cell or a
//! black-box core). Inside a module every port is also a net of the same
//! name. Instance pins connect to a net or are explicitly left open.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Direction {
    In,
    Out,
    InOut,
}

impl Direction {
    pub fn keyword(self) -> &'static str {
        match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::InOut => "inout",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "in" | "input" => Direction::In,
            "out" | "output" => Direction::Out,
            "inout" => Direction::InOut,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Port {
    pub name: String,
    pub dir: Direction,
}

impl Port {
    pub fn new(name: impl Into<String>, dir: Direction) -> Self {
        Port { name: name.into(), dir }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub enum Conn {
    Net(String),
    Open,
}

impl Conn {
    pub fn net(&self) -> Option<&str> {
        match self {
            Conn::Net(n) => Some(n),
            Conn::Open => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Instance {
    pub module: String,
    pub name: String,
    pub conns: Vec<(String, Conn)>,
}

impl Instance {
    pub fn new(module: impl Into<String>, name: impl Into<String>) -> Self {
        Instance {
            module: module.into(),
            name: name.into(),
            conns: Vec::new(),
        }
    }

    pub fn pin(mut self, port: impl Into<String>, net: impl Into<String>) -> Self {
        self.conns.push((port.into(), Conn::Net(net.into())));
        self
    }

    pub fn open(mut self, port: impl Into<String>) -> Self {
        self.conns.push((port.into(), Conn::Open));
        self
    }

    pub fn conn(&self, port: &str) -> Option<&Conn> {
        self.conns.iter().find(|(p, _)| p == port).map(|(_, c)| c)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Module {
    pub name: String,
    pub ports: Vec<Port>,
    pub nets: Vec<String>,
    pub instances: Vec<Instance>,
}

impl Module {
    pub fn new(name: impl Into<String>) -> Self {
        Module {
            name: name.into(),
            ports: Vec::new(),
            nets: Vec::new(),
            instances: Vec::new(),
        }
    }

    pub fn leaf(name: &str, ports: &[(&str, Direction)]) -> Self {
        let mut m = Module::new(name);
        m.ports = ports.iter().map(|&(n, d)| Port::new(n, d)).collect();
        m
    }

    pub fn is_leaf(&self) -> bool {
        self.nets.is_empty() && self.instances.is_empty()
    }

    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| p.name == name)
    }

    pub fn add_port(&mut self, name: impl Into<String>, dir: Direction) {
        self.ports.push(Port::new(name, dir));
    }

    pub fn add_net(&mut self, name: impl Into<String>) -> String {
        let name = name.into();
        self.nets.push(name.clone());
        name
    }

    pub fn instance(&self, name: &str) -> Option<&Instance> {
        self.instances.iter().find(|i| i.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Netlist {
    pub top: String,
    pub modules: Vec<Module>,
}

impl Netlist {
    pub fn module(&self, name: &str) -> Option<&Module> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn module_mut(&mut self, name: &str) -> Option<&mut Module> {
        self.modules.iter_mut().find(|m| m.name == name)
    }

    pub fn top_module(&self) -> Option<&Module> {
        self.module(&self.top)
    }

    /// Adds `m` unless a module of that name exists already.
    pub fn add_module(&mut self, m: Module) {
        if self.module(&m.name).is_none() {
            self.modules.push(m);
        }
    }
}

/// Prefix of every generated library cell.
pub const LIB_PREFIX: &str = "STK_";

/// Leaf cells used by generated test logic.
pub fn cell_library() -> Vec<Module> {
    use Direction::{In, InOut, Out};
    vec![
        Module::leaf(
            "STK_WBR",
            &[
                ("fi", In),
                ("si", In),
                ("se", In),
                ("tm", In),
                ("ck", In),
                ("fo", Out),
                ("so", Out),
            ],
        ),
        Module::leaf("STK_MUX2", &[("a", In), ("b", In), ("s", In), ("y", Out)]),
        Module::leaf("STK_TIE0", &[("y", Out)]),
        Module::leaf("STK_TIE1", &[("y", Out)]),
        Module::leaf("STK_INV", &[("a", In), ("y", Out)]),
        Module::leaf("STK_BUF", &[("a", In), ("y", Out)]),
        Module::leaf("STK_AND2", &[("a", In), ("b", In), ("y", Out)]),
        Module::leaf("STK_OR2", &[("a", In), ("b", In), ("y", Out)]),
        Module::leaf("STK_XOR2", &[("a", In), ("b", In), ("y", Out)]),
        Module::leaf("STK_DFF", &[("d", In), ("ck", In), ("q", Out)]),
        Module::leaf("STK_DFFE", &[("d", In), ("en", In), ("ck", In), ("q", Out)]),
        Module::leaf("STK_IOBUF", &[("a", In), ("oe", In), ("y", Out), ("pad", InOut)]),
    ]
}

/// Input-to-output arcs that are transparent in functional mode.
pub fn transparent_arcs(cell: &str) -> &'static [(&'static str, &'static str)] {
    match cell {
        "STK_WBR" => &[("fi", "fo")],
        "STK_MUX2" => &[("a", "y")],
        _ => &[],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum NetlistViolation {
    MissingTop(String),
    DuplicateModule(String),
    UndefinedModule {
        module: String,
        instance: String,
        target: String,
    },
    DuplicateInstance {
        module: String,
        instance: String,
    },
    DuplicateNet {
        module: String,
        net: String,
    },
    UnknownPort {
        module: String,
        instance: String,
        port: String,
    },
    PortConnectedTwice {
        module: String,
        instance: String,
        port: String,
    },
    PortUnconnected {
        module: String,
        instance: String,
        port: String,
    },
    UndeclaredNet {
        module: String,
        net: String,
    },
    MultipleDrivers {
        module: String,
        net: String,
        drivers: Vec<String>,
    },
    UndrivenOutput {
        module: String,
        port: String,
    },
}

impl core::fmt::Display for NetlistViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        use NetlistViolation::*;
        match self {
            MissingTop(t) => write!(f, "top module {t} is not defined"),
            DuplicateModule(m) => write!(f, "module {m} defined twice"),
            UndefinedModule {
                module,
                instance,
                target,
            } => write!(f, "{module}.{instance}: module {target} is not defined"),
            DuplicateInstance { module, instance } => {
                write!(f, "{module}: instance {instance} declared twice")
            }
            DuplicateNet { module, net } => write!(f, "{module}: net {net} declared twice"),
            UnknownPort { module, instance, port } => write!(f, "{module}.{instance}: no port {port}"),
            PortConnectedTwice { module, instance, port } => {
                write!(f, "{module}.{instance}: port {port} connected twice")
            }
            PortUnconnected { module, instance, port } => write!(f, "{module}.{instance}: port {port} not connected"),
            UndeclaredNet { module, net } => write!(f, "{module}: net {net} is not declared"),
            MultipleDrivers { module, net, drivers } => {
                write!(f, "{module}: net {net} has drivers {}", drivers.join(", "))
            }
            UndrivenOutput { module, port } => write!(f, "{module}: output {port} is never driven"),
        }
    }
}

/// Structural checks: defined modules, every instance port connected exactly
/// once (to a declared net or open), at most one driver per net.
pub fn validate_netlist(n: &Netlist) -> Vec<NetlistViolation> {
    use NetlistViolation::*;
    let mut v = Vec::new();
    let mut defs: BTreeMap<&str, &Module> = BTreeMap::new();
    for m in &n.modules {
        if defs.insert(m.name.as_str(), m).is_some() {
            v.push(DuplicateModule(m.name.clone()));
        }
    }
    if !defs.contains_key(n.top.as_str()) {
        v.push(MissingTop(n.top.clone()));
    }

    for m in &n.modules {
        if m.is_leaf() {
            continue;
        }
        let mut nets: BTreeSet<&str> = BTreeSet::new();
        for p in &m.ports {
            if !nets.insert(p.name.as_str()) {
                v.push(DuplicateNet {
                    module: m.name.clone(),
                    net: p.name.clone(),
                });
            }
        }
        for net in &m.nets {
            if !nets.insert(net.as_str()) {
                v.push(DuplicateNet {
                    module: m.name.clone(),
                    net: net.clone(),
                });
            }
        }

        let mut drivers: BTreeMap<&str, Vec<String>> = BTreeMap::new();
        for p in &m.ports {
            if p.dir == Direction::In {
                drivers.entry(p.name.as_str()).or_default().push(p.name.clone());
            }
        }
        let mut inst_names = BTreeSet::new();
        for inst in &m.instances {
            if !inst_names.insert(inst.name.as_str()) {
                v.push(DuplicateInstance {
                    module: m.name.clone(),
                    instance: inst.name.clone(),
                });
            }
            let Some(target) = defs.get(inst.module.as_str()) else {
                v.push(UndefinedModule {
                    module: m.name.clone(),
                    instance: inst.name.clone(),
                    target: inst.module.clone(),
                });
                continue;
            };
            let mut seen = BTreeSet::new();
            for (port, conn) in &inst.conns {
                let Some(p) = target.port(port) else {
                    v.push(UnknownPort {
                        module: m.name.clone(),
                        instance: inst.name.clone(),
                        port: port.clone(),
                    });
                    continue;
                };
                if !seen.insert(port.as_str()) {
                    v.push(PortConnectedTwice {
                        module: m.name.clone(),
                        instance: inst.name.clone(),
                        port: port.clone(),
                    });
                    continue;
                }
                if let Conn::Net(net) = conn {
                    if !nets.contains(net.as_str()) {
                        v.push(UndeclaredNet {
                            module: m.name.clone(),
                            net: net.clone(),
                        });
                    } else if p.dir == Direction::Out {
                        drivers
                            .entry(net.as_str())
                            .or_default()
                            .push(format!("{}.{}", inst.name, port));
                    }
                }
            }
            for p in &target.ports {
                if !seen.contains(p.name.as_str()) {
                    v.push(PortUnconnected {
                        module: m.name.clone(),
                        instance: inst.name.clone(),
                        port: p.name.clone(),
                    });
                }
            }
        }
        for (net, d) in &drivers {
            if d.len() > 1 {
                v.push(MultipleDrivers {
                    module: m.name.clone(),
                    net: net.to_string(),
                    drivers: d.clone(),
                });
            }
        }
        for p in &m.ports {
            if p.dir == Direction::Out && !drivers.contains_key(p.name.as_str()) {
                v.push(UndrivenOutput {
                    module: m.name.clone(),
                    port: p.name.clone(),
                });
            }
        }
    }
    v
}

/// A leaf instance reached by flattening, with its hierarchical path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatInstance {
    pub path: String,
    pub module: String,
    /// Port name to flat net id, `None` when open.
    pub pins: Vec<(String, Option<usize>)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatNetlist {
    pub net_names: Vec<String>,
    pub top_ports: Vec<(Port, usize)>,
    pub leaves: Vec<FlatInstance>,
}

impl FlatNetlist {
    pub fn top_net(&self, port: &str) -> Option<usize> {
        self.top_ports.iter().find(|(p, _)| p.name == port).map(|(_, id)| *id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FlattenError {
    #[error("module {0} is not defined")]
    UndefinedModule(String),
    #[error("net {net} is not declared in {module}")]
    UndeclaredNet { module: String, net: String },
    #[error("instance hierarchy is recursive at {0}")]
    Recursive(String),
}

/// Flattens the hierarchy below the top module into leaf instances over a
/// single net namespace.
pub fn flatten(n: &Netlist) -> Result<FlatNetlist, FlattenError> {
    let top = n
        .top_module()
        .ok_or_else(|| FlattenError::UndefinedModule(n.top.clone()))?;
    let mut out = FlatNetlist {
        net_names: Vec::new(),
        top_ports: Vec::new(),
        leaves: Vec::new(),
    };
    let mut bind = BTreeMap::new();
    for p in &top.ports {
        let id = out.net_names.len();
        out.net_names.push(p.name.clone());
        out.top_ports.push((p.clone(), id));
        bind.insert(p.name.clone(), Some(id));
    }
    flatten_into(n, top, "", &bind, &mut out, 0)?;
    Ok(out)
}

fn flatten_into(
    n: &Netlist,
    m: &Module,
    prefix: &str,
    ports: &BTreeMap<String, Option<usize>>,
    out: &mut FlatNetlist,
    depth: usize,
) -> Result<(), FlattenError> {
    if depth > 64 {
        return Err(FlattenError::Recursive(m.name.clone()));
    }
    let mut local: BTreeMap<&str, Option<usize>> = BTreeMap::new();
    for p in &m.ports {
        local.insert(p.name.as_str(), ports.get(&p.name).copied().flatten());
    }
    for net in &m.nets {
        let id = out.net_names.len();
        out.net_names.push(format!("{prefix}{net}"));
        local.insert(net.as_str(), Some(id));
    }
    // ports left open by the parent still need a net so leaves can share it
    let open_ports: Vec<&str> = local.iter().filter(|(_, id)| id.is_none()).map(|(k, _)| *k).collect();
    for p in open_ports {
        let id = out.net_names.len();
        out.net_names.push(format!("{prefix}{p}"));
        local.insert(p, Some(id));
    }
    for inst in &m.instances {
        let target = n
            .module(&inst.module)
            .ok_or_else(|| FlattenError::UndefinedModule(inst.module.clone()))?;
        let mut pins = Vec::with_capacity(inst.conns.len());
        for (port, conn) in &inst.conns {
            let id = match conn {
                Conn::Net(net) => {
                    Some(
                        local
                            .get(net.as_str())
                            .copied()
                            .flatten()
                            .ok_or_else(|| FlattenError::UndeclaredNet {
                                module: m.name.clone(),
                                net: net.clone(),
                            })?,
                    )
                }
                Conn::Open => None,
            };
            pins.push((port.clone(), id));
        }
        let path = format!("{prefix}{}", inst.name);
        if target.is_leaf() {
            out.leaves.push(FlatInstance {
                path,
                module: inst.module.clone(),
                pins,
            });
        } else {
            let map = pins.into_iter().collect();
            flatten_into(n, target, &format!("{path}/"), &map, out, depth + 1)?;
        }
    }
    Ok(())
}

/// Union-find over flat nets.
struct Dsu(Vec<usize>);

impl Dsu {
    fn new(n: usize) -> Self {
        Dsu((0..n).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (a, b) = (self.find(a), self.find(b));
        if a != b {
            self.0[a.max(b)] = a.min(b);
        }
    }
}

/// Groups of functional endpoints that are connected in functional mode.
///
/// Endpoints are top-level ports (`port`) and pins of non-library leaf
/// instances (`path.pin`). Library cells are transparent along
/// [`transparent_arcs`] and opaque otherwise. Path segments named `hide`
/// are removed, so a core moved one level down keeps its endpoint names.
/// Pins for which `skip(module, pin)` holds are not endpoints.
pub fn functional_connectivity(
    n: &Netlist,
    hide: &str,
    skip: impl Fn(&str, &str) -> bool,
) -> Result<BTreeSet<BTreeSet<String>>, FlattenError> {
    let flat = flatten(n)?;
    let mut dsu = Dsu::new(flat.net_names.len());
    for leaf in &flat.leaves {
        for (a, b) in transparent_arcs(&leaf.module) {
            let pa = leaf.pins.iter().find(|(p, _)| p == a).and_then(|x| x.1);
            let pb = leaf.pins.iter().find(|(p, _)| p == b).and_then(|x| x.1);
            if let (Some(x), Some(y)) = (pa, pb) {
                dsu.union(x, y);
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (p, id) in &flat.top_ports {
        let r = dsu.find(*id);
        groups.entry(r).or_default().insert(p.name.clone());
    }
    for leaf in &flat.leaves {
        if leaf.module.starts_with(LIB_PREFIX) {
            continue;
        }
        let path: Vec<&str> = leaf.path.split('/').filter(|s| *s != hide).collect();
        let path = path.join("/");
        for (pin, id) in &leaf.pins {
            if skip(&leaf.module, pin) {
                continue;
            }
            if let Some(id) = id {
                let r = dsu.find(*id);
                groups.entry(r).or_default().insert(format!("{path}.{pin}"));
            }
        }
    }
    Ok(groups.into_values().filter(|g| g.len() > 1).collect())
}

/// Cycle-based evaluation of a flattened netlist of library cells.
///
/// Combinational cells are evaluated in dependency order, with a fixed-point
/// fallback for loops; every flop samples on [`GateSim::tick`], whatever net
/// drives its clock pin.
pub struct GateSim {
    ports: Vec<(String, usize)>,
    gates: Vec<Gate>,
    /// Combinational gates in evaluation order.
    order: Vec<usize>,
    flops: Vec<usize>,
    looped: bool,
    values: Vec<bool>,
    state: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum GateKind {
    Mux,
    Tie(bool),
    Inv,
    Buf,
    And,
    Or,
    Xor,
    Dff,
    Dffe,
}

#[derive(Debug, Clone, Copy)]
struct Gate {
    kind: GateKind,
    /// a, b, s for combinational cells; d, en for flops.
    ins: [Option<usize>; 3],
    out: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Flatten(#[from] FlattenError),
    #[error("cell {cell} at {path} cannot be simulated")]
    UnsupportedCell { cell: String, path: String },
    #[error("no top-level port {0}")]
    UnknownPort(String),
    #[error("combinational logic did not settle")]
    NoFixedPoint,
}

impl GateSim {
    pub fn new(n: &Netlist) -> Result<Self, SimError> {
        let flat = flatten(n)?;
        let mut gates = Vec::with_capacity(flat.leaves.len());
        for leaf in &flat.leaves {
            let pin = |name: &str| leaf.pins.iter().find(|(p, _)| p == name).and_then(|(_, id)| *id);
            let (kind, ins, out) = match leaf.module.as_str() {
                "STK_MUX2" => (GateKind::Mux, ["a", "b", "s"], "y"),
                "STK_TIE0" => (GateKind::Tie(false), ["", "", ""], "y"),
                "STK_TIE1" => (GateKind::Tie(true), ["", "", ""], "y"),
                "STK_INV" => (GateKind::Inv, ["a", "", ""], "y"),
                "STK_BUF" => (GateKind::Buf, ["a", "", ""], "y"),
                "STK_AND2" => (GateKind::And, ["a", "b", ""], "y"),
                "STK_OR2" => (GateKind::Or, ["a", "b", ""], "y"),
                "STK_XOR2" => (GateKind::Xor, ["a", "b", ""], "y"),
                "STK_DFF" => (GateKind::Dff, ["d", "", ""], "q"),
                "STK_DFFE" => (GateKind::Dffe, ["d", "en", ""], "q"),
                _ => {
                    return Err(SimError::UnsupportedCell {
                        cell: leaf.module.clone(),
                        path: leaf.path.clone(),
                    })
                }
            };
            gates.push(Gate {
                kind,
                ins: ins.map(|p| if p.is_empty() { None } else { pin(p) }),
                out: pin(out),
            });
        }
        let nets = flat.net_names.len();
        let is_flop = |g: &Gate| matches!(g.kind, GateKind::Dff | GateKind::Dffe);
        let flops: Vec<usize> = (0..gates.len()).filter(|&i| is_flop(&gates[i])).collect();

        // Kahn's algorithm over combinational gates.
        let mut driver = vec![usize::MAX; nets];
        for (i, g) in gates.iter().enumerate() {
            if let (Some(o), false) = (g.out, is_flop(g)) {
                driver[o] = i;
            }
        }
        let mut pending = vec![0usize; gates.len()];
        let mut fanout: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
        for (i, g) in gates.iter().enumerate() {
            if is_flop(g) {
                continue;
            }
            for id in g.ins.iter().flatten() {
                let d = driver[*id];
                if d != usize::MAX {
                    pending[i] += 1;
                    fanout[d].push(i);
                }
            }
        }
        let mut order: Vec<usize> = (0..gates.len())
            .filter(|&i| !is_flop(&gates[i]) && pending[i] == 0)
            .collect();
        let mut head = 0;
        while head < order.len() {
            let g = order[head];
            head += 1;
            for &f in &fanout[g] {
                pending[f] -= 1;
                if pending[f] == 0 {
                    order.push(f);
                }
            }
        }
        let comb = gates.iter().filter(|g| !is_flop(g)).count();
        let looped = order.len() < comb;
        if looped {
            order = (0..gates.len()).filter(|&i| !is_flop(&gates[i])).collect();
        }
        let mut sim = GateSim {
            ports: flat.top_ports.iter().map(|(p, id)| (p.name.clone(), *id)).collect(),
            state: vec![false; gates.len()],
            gates,
            order,
            flops,
            looped,
            values: vec![false; nets],
        };
        sim.settle()?;
        Ok(sim)
    }

    fn port_id(&self, port: &str) -> Result<usize, SimError> {
        self.ports
            .iter()
            .find(|(p, _)| p == port)
            .map(|(_, id)| *id)
            .ok_or_else(|| SimError::UnknownPort(port.to_string()))
    }

    pub fn set(&mut self, port: &str, value: bool) -> Result<(), SimError> {
        let id = self.port_id(port)?;
        self.values[id] = value;
        self.settle()
    }

    /// Sets several ports, then settles once.
    pub fn set_many<'a>(&mut self, ports: impl IntoIterator<Item = (&'a str, bool)>) -> Result<(), SimError> {
        for (port, value) in ports {
            let id = self.port_id(port)?;
            self.values[id] = value;
        }
        self.settle()
    }

    pub fn get(&self, port: &str) -> Result<bool, SimError> {
        Ok(self.values[self.port_id(port)?])
    }

    fn input(&self, id: Option<usize>) -> bool {
        id.is_some_and(|id| self.values[id])
    }

    /// Clocks every flop once, then settles.
    pub fn tick(&mut self) -> Result<(), SimError> {
        for &i in &self.flops {
            let g = self.gates[i];
            let load = g.kind == GateKind::Dff || self.input(g.ins[1]);
            if load {
                self.state[i] = self.input(g.ins[0]);
            }
        }
        self.settle()
    }

    fn eval(&self, g: &Gate) -> bool {
        let [a, b, s] = g.ins.map(|x| self.input(x));
        match g.kind {
            GateKind::Mux => {
                if s {
                    b
                } else {
                    a
                }
            }
            GateKind::Tie(v) => v,
            GateKind::Inv => !a,
            GateKind::Buf => a,
            GateKind::And => a && b,
            GateKind::Or => a || b,
            GateKind::Xor => a ^ b,
            GateKind::Dff | GateKind::Dffe => unreachable!("flops are not evaluated"),
        }
    }

    fn settle(&mut self) -> Result<(), SimError> {
        for &i in &self.flops {
            if let Some(o) = self.gates[i].out {
                self.values[o] = self.state[i];
            }
        }
        let passes = if self.looped { self.order.len() + 2 } else { 1 };
        for _ in 0..passes {
            let mut changed = false;
            for k in 0..self.order.len() {
                let g = self.gates[self.order[k]];
                let y = self.eval(&g);
                if let Some(o) = g.out {
                    if self.values[o] != y {
                        self.values[o] = y;
                        changed = true;
                    }
                }
            }
            if !changed || !self.looped {
                return Ok(());
            }
        }
        Err(SimError::NoFixedPoint)
    }
}
