"""Built-in contract method library.

Scenarios pick a contract `kind`; the kind decides which methods the
contract exposes.  All bodies are pure functions of (state, params,
caller) and keep their writes inside the owning contract, which makes
oracle replay of recorded invocations exact.
"""

from __future__ import annotations

from .chain import Address, Contract, MethodDef, MethodFailure


def _as_name(value) -> str:
    if isinstance(value, bytes):
        return value.decode("utf-8")
    raise MethodFailure("BadParams")


def _as_int(value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise MethodFailure("BadParams")
    return value


def _balance_key(account: str) -> str:
    return "bal:" + account


def _token_transfer(ctx):
    if len(ctx.params) != 3:
        raise MethodFailure("BadParams")
    src = _balance_key(_as_name(ctx.params[0]))
    dst = _balance_key(_as_name(ctx.params[1]))
    amount = _as_int(ctx.params[2])
    if amount < 0:
        raise MethodFailure("BadParams")
    have = ctx.vars.get(src, 0)
    if have < amount:
        raise MethodFailure("InsufficientFunds")
    ctx.vars[src] = have - amount
    ctx.vars[dst] = ctx.vars.get(dst, 0) + amount
    return True


def _token_mint(ctx):
    if len(ctx.params) != 2:
        raise MethodFailure("BadParams")
    dst = _balance_key(_as_name(ctx.params[0]))
    amount = _as_int(ctx.params[1])
    if amount < 0:
        raise MethodFailure("BadParams")
    ctx.vars[dst] = ctx.vars.get(dst, 0) + amount
    return True


def _counter_incr(ctx):
    if len(ctx.params) != 1:
        raise MethodFailure("BadParams")
    ctx.vars["count"] = ctx.vars.get("count", 0) + _as_int(ctx.params[0])
    return ctx.vars["count"]


def _counter_set(ctx):
    if len(ctx.params) != 1:
        raise MethodFailure("BadParams")
    ctx.vars["count"] = _as_int(ctx.params[0])
    return ctx.vars["count"]


def _noop(ctx):
    return True


def _always_fail(ctx):
    raise MethodFailure("AlwaysFails")


def _notification(ctx):
    # Destination hook for cross-chain notifications: params are
    # (origin contract, origin chain, data).
    if len(ctx.params) != 3:
        raise MethodFailure("BadParams")
    ctx.vars["note_count"] = ctx.vars.get("note_count", 0) + 1
    ctx.vars["note_last"] = ctx.params[2]
    return True


_LIBRARY = {
    "token": {"transfer": _token_transfer, "mint": _token_mint},
    "counter": {"incr": _counter_incr, "set": _counter_set},
    "inbox": {"notification": _notification},
    "noop": {"noop": _noop},
    "faulty": {"fail": _always_fail},
}


def library_kinds() -> list:
    return sorted(_LIBRARY)


def method_names(kind: str) -> list:
    return sorted(_LIBRARY.get(kind, ()))


def build_contract(addr: Address, kind: str, owner: Address,
                   init_vars: dict, trusted: set) -> Contract:
    if kind not in _LIBRARY:
        raise KeyError(kind)
    scope = frozenset([addr])
    methods = {name: MethodDef(name, body, scope)
               for name, body in _LIBRARY[kind].items()}
    contract = Contract(addr=addr, vars=dict(init_vars), owner=owner,
                        kind=kind, trusted_executors=set(trusted),
                        methods=methods)
    return contract


def token_init(balances: dict) -> dict:
    """Translate {account: amount} into the token's variable layout."""
    return {_balance_key(name): amount for name, amount in balances.items()}
