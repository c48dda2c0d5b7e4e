use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::PathVariant;
use crate::ast::*;

/// Give every local declared more than once along the path its own name.
///
/// Instances of a duplicated name become `name_0`, `name_1`, ... in path
/// order (skipping names already taken). A local that shadows a field is
/// renamed too, since the variant has no scopes to tell them apart. Entry
/// parameters keep their names because tests bind to them.
pub fn rename_variables(variant: &PathVariant, program: &Program) -> PathVariant {
    let mut groups: Vec<(String, Vec<(u32, bool)>)> = Vec::new();
    let mut add = |name: &str, instance: u32, pinned: bool| match groups.iter_mut().find(|(n, _)| n == name) {
        Some((_, members)) => members.push((instance, pinned)),
        None => groups.push((name.into(), alloc::vec![(instance, pinned)])),
    };
    for p in &variant.params {
        add(&p.name, p.instance, true);
    }
    for s in &variant.steps {
        if let (Some(i), StmtKind::Decl { name, .. }) = (s.binds, &s.stmt.kind) {
            add(name, i, false);
        }
    }

    let fields: BTreeSet<&str> = program.fields.iter().map(|f| f.name.as_str()).collect();
    let mut used: BTreeSet<String> = groups.iter().map(|(n, _)| n.clone()).collect();
    used.extend(fields.iter().map(|f| String::from(*f)));

    let mut names: BTreeMap<u32, String> = BTreeMap::new();
    for (name, members) in &groups {
        if members.len() < 2 && !fields.contains(name.as_str()) {
            continue;
        }
        let mut k = 0;
        for (instance, pinned) in members {
            if *pinned {
                continue;
            }
            let fresh = loop {
                let candidate = format!("{name}_{k}");
                k += 1;
                if !used.contains(&candidate) {
                    break candidate;
                }
            };
            used.insert(fresh.clone());
            names.insert(*instance, fresh);
        }
    }

    let mut out = variant.clone();
    if names.is_empty() {
        return out;
    }
    let rename_ref = |v: &mut VarRef| {
        if let Binding::Instance(i) = v.binding {
            if let Some(n) = names.get(&i) {
                v.name = n.clone();
            }
        }
    };
    for s in &mut out.steps {
        match &mut s.stmt.kind {
            StmtKind::Decl { name, .. } => {
                if let Some(n) = s.binds.and_then(|i| names.get(&i)) {
                    *name = n.clone();
                }
            }
            StmtKind::Assign { target, .. } => rename_ref(target.var_mut()),
            _ => {}
        }
        for e in s.stmt.exprs_mut() {
            e.walk_mut(&mut |x| {
                if let ExprKind::Var(v) = &mut x.kind {
                    rename_ref(v);
                }
            });
        }
    }
    out
}
