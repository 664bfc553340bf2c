// SPDX-License-Identifier: Apache-2.0

//! Structural netlist text.
//!
//! ```text
//! top soc;
//!
//! module STK_AND2 (in a, in b, out y);
//! endmodule
//!
//! module soc (in clk, out done);
//!   net n0;
//!   inst STK_AND2 u0 (.a(clk), .b(n0), .y(done));
//!   inst STK_INV u1 (.a(clk), .y());
//! endmodule
//! ```
//!
//! `.p()` marks an unconnected pin. Writing is canonical: writing a parsed
//! canonical file reproduces it byte for byte.

use std::fmt::Write as _;

use stk_core::netlist::{Conn, Direction, Instance, Module, Netlist, Port};

use super::lex::{Cursor, SyntaxError};

const PUNCT: &[char] = &['(', ')', ',', ';', '.'];

pub fn write_netlist(n: &Netlist) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "top {};", n.top);
    for m in &n.modules {
        s.push('\n');
        write_module(&mut s, m);
    }
    s
}

fn write_module(s: &mut String, m: &Module) {
    let ports: Vec<String> = m
        .ports
        .iter()
        .map(|p| format!("{} {}", p.dir.keyword(), p.name))
        .collect();
    let _ = writeln!(s, "module {} ({});", m.name, ports.join(", "));
    for n in &m.nets {
        let _ = writeln!(s, "  net {n};");
    }
    for i in &m.instances {
        let conns: Vec<String> = i
            .conns
            .iter()
            .map(|(p, c)| match c {
                Conn::Net(n) => format!(".{p}({n})"),
                Conn::Open => format!(".{p}()"),
            })
            .collect();
        let _ = writeln!(s, "  inst {} {} ({});", i.module, i.name, conns.join(", "));
    }
    s.push_str("endmodule\n");
}

pub fn parse_netlist(text: &str) -> Result<Netlist, SyntaxError> {
    let mut c = Cursor::new(text, PUNCT);
    c.expect("top")?;
    let top = c.word("top module name", PUNCT)?.text.to_string();
    c.expect(";")?;
    let mut modules: Vec<Module> = Vec::new();
    while !c.at_end() {
        let kw = c.expect("module")?;
        let name = c.word("module name", PUNCT)?.text;
        if modules.iter().any(|m| m.name == name) {
            return Err(c.error_at(kw, format!("module {name} defined twice")));
        }
        let mut m = Module::new(name);
        c.expect("(")?;
        if !c.eat(")") {
            loop {
                let d = c.word("port direction", PUNCT)?;
                let dir = Direction::from_keyword(d.text)
                    .ok_or_else(|| c.error_at(d, format!("unknown port direction `{}`", d.text)))?;
                let pname = c.word("port name", PUNCT)?.text;
                m.ports.push(Port::new(pname, dir));
                if c.eat(")") {
                    break;
                }
                c.expect(",")?;
            }
        }
        c.expect(";")?;
        loop {
            let t = c.word("`net`, `inst` or `endmodule`", PUNCT)?;
            match t.text {
                "endmodule" => break,
                "net" => {
                    m.nets.push(c.word("net name", PUNCT)?.text.to_string());
                    c.expect(";")?;
                }
                "inst" => {
                    let module = c.word("instance module", PUNCT)?.text;
                    let iname = c.word("instance name", PUNCT)?.text;
                    let mut inst = Instance::new(module, iname);
                    c.expect("(")?;
                    if !c.eat(")") {
                        loop {
                            c.expect(".")?;
                            let pin = c.word("pin name", PUNCT)?.text;
                            c.expect("(")?;
                            if c.eat(")") {
                                inst = inst.open(pin);
                            } else {
                                inst = inst.pin(pin, c.word("net name", PUNCT)?.text);
                                c.expect(")")?;
                            }
                            if c.eat(")") {
                                break;
                            }
                            c.expect(",")?;
                        }
                    }
                    c.expect(";")?;
                    m.instances.push(inst);
                }
                other => return Err(c.error_at(t, format!("expected `net`, `inst` or `endmodule`, found `{other}`"))),
            }
        }
        modules.push(m);
    }
    Ok(Netlist { top, modules })
}
