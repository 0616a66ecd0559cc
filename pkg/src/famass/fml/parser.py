"""Recursive-descent parser turning FML text into an :class:`AnalysisModel`.

Syntax errors stop the parse at the first offending token. Identifier
problems (duplicate ids, references to undeclared DPA entities) are
collected over the whole document and raised together, first one on top.
Agent-level references (mediator scopes, IAOA selectors, protocol
bindings) need agentification and are checked by :func:`famass.fml.resolve`.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional, TypeVar

from famass.analysis import (
    ABILITY_PARAMS,
    COMPARATORS,
    DISTRIBUTION_ARITY,
    QUANTITIES,
    AbilityDecl,
    AbilityKind,
    AnalysisModel,
    DpaSection,
    Distribution,
    Factor,
    GpaSection,
    IaoaSection,
    InfoType,
    InventoryDecl,
    KpiRef,
    Mediator,
    Merge,
    Metric,
    Product,
    ProtocolDecl,
    ProtocolType,
    Relation,
    RelationKind,
    ResponseRule,
    SaoaSection,
    Selector,
    SocialStructure,
    SourceMap,
    Specialization,
    Split,
    SplitPart,
    StockKind,
    Uncertainty,
)
from famass.fml.errors import (
    DanglingReference,
    DuplicateId,
    FmlError,
    FmlSyntaxError,
    UnknownKeyword,
)
from famass.fml.lexer import Token, tokenize
from famass.metamodel import (
    DecisionLevel,
    FunctionalArea,
    SpatialRole,
    SpatialUnit,
    SupplyChainBlock,
)

E = TypeVar("E", bound=Enum)

SECTIONS = ("gpa", "dpa", "saoa", "iaoa")
STATEMENTS = {
    "gpa": ("objective", "question", "hypothesis", "factor", "uncertainty", "kpi"),
    "dpa": ("unit", "product", "block", "relation", "decoupling", "inventory"),
    "saoa": ("structure", "merge", "split", "mediator", "protocol"),
    "iaoa": ("ability", "rule"),
}


def parse_fml(text: str, filename: str = "<model>") -> AnalysisModel:
    """Parse an FML document. Raises a subclass of :class:`FmlError`."""
    return _Parser(tokenize(text), filename).document()


def parse_file(path) -> AnalysisModel:
    from pathlib import Path

    path = Path(path)
    data = path.read_bytes().decode("utf-8")
    return parse_fml(data, str(path))


class _Parser:
    def __init__(self, tokens: list[Token], filename: str):
        self.toks = tokens
        self.pos = 0
        self.source = SourceMap(filename)
        # (namespace, symbol, token) for definitions and references
        self.defs: list[tuple[str, str, Token]] = []
        self.refs: list[tuple[str, str, Token]] = []
        self.split_product_refs: list[tuple[str, Token]] = []

    # -- token helpers -----------------------------------------------------

    def peek(self, offset: int = 0) -> Token:
        return self.toks[min(self.pos + offset, len(self.toks) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        self.pos += 1
        return tok

    def at(self, kind: str, value=None) -> bool:
        tok = self.peek()
        return tok.kind == kind and (value is None or tok.value == value)

    def accept(self, kind: str, value=None) -> Optional[Token]:
        if self.at(kind, value):
            return self.next()
        return None

    def expect(self, kind: str, value=None, what: str = "") -> Token:
        tok = self.peek()
        if tok.kind == kind and (value is None or tok.value == value):
            return self.next()
        want = what or (repr(value) if value is not None else kind.lower())
        raise FmlSyntaxError(f"expected {want}, found {tok}", tok.line, tok.col, tok.text)

    def ident(self, what: str = "identifier") -> Token:
        return self.expect("IDENT", what=what)

    def keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.value == word:
            return self.next()
        raise FmlSyntaxError(f"expected {word!r}, found {tok}", tok.line, tok.col, tok.text)

    def enum(self, cls: type[E], what: str) -> E:
        tok = self.ident(what)
        try:
            return cls(tok.value)
        except ValueError:
            allowed = ", ".join(m.value for m in cls)
            raise UnknownKeyword(
                f"unknown {what} {tok.value!r} (expected one of: {allowed})",
                tok.line,
                tok.col,
                tok.value,
            ) from None

    def integer(self, what: str) -> int:
        tok = self.expect("NUMBER", what=what)
        if not isinstance(tok.value, int):
            raise FmlSyntaxError(f"{what} must be an integer", tok.line, tok.col, tok.text)
        return tok.value

    def end_statement(self) -> None:
        tok = self.peek()
        if tok.kind == "NEWLINE":
            self.next()
            return
        if tok.kind == "PUNCT" and tok.value == "}":
            return
        raise FmlSyntaxError(f"unexpected {tok} at end of statement", tok.line, tok.col, tok.text)

    def skip_newlines(self) -> None:
        while self.accept("NEWLINE"):
            pass

    def define(self, ns: str, tok: Token) -> None:
        self.defs.append((ns, tok.value, tok))
        self.source.positions.setdefault((ns, tok.value), (tok.line, tok.col))

    def refer(self, ns: str, tok: Token) -> None:
        self.refs.append((ns, tok.value, tok))

    def mark(self, kind: str, key, tok: Token) -> None:
        self.source.positions[(kind, str(key))] = (tok.line, tok.col)

    def list_of(self, item):
        self.expect("PUNCT", "[")
        out = []
        if self.accept("PUNCT", "]"):
            return out
        while True:
            out.append(item())
            if self.accept("PUNCT", "]"):
                return out
            self.expect("PUNCT", ",", what="',' or ']'")

    # -- document ------------------------------------------------------------

    def document(self) -> AnalysisModel:
        self.sections: dict[str, list] = {s: [] for s in SECTIONS}
        self.gpa = dict(objective="", questions=[], hypotheses=[], factors=[], uncertainties=[], kpis=[])
        self.dpa = dict(units=[], blocks=[], relations=[], products=[], decoupling_point=None, inventories=[])
        self.saoa = dict(social_structure=None, directives=[], protocols=[])
        self.iaoa = dict(abilities=[], responses=[])
        seen: set[str] = set()
        self.skip_newlines()
        while not self.at("EOF"):
            tok = self.peek()
            if tok.kind != "IDENT":
                raise FmlSyntaxError(f"expected a section, found {tok}", tok.line, tok.col, tok.text)
            if tok.value not in SECTIONS:
                raise UnknownKeyword(
                    f"unknown section {tok.value!r} (expected one of: {', '.join(SECTIONS)})",
                    tok.line,
                    tok.col,
                    tok.value,
                )
            if tok.value in seen:
                raise FmlSyntaxError(f"section {tok.value!r} appears twice", tok.line, tok.col, tok.value)
            seen.add(tok.value)
            self.next()
            self.section(tok.value)
            self.skip_newlines()
        self.check_identifiers()
        return AnalysisModel(
            gpa=GpaSection(
                objective=self.gpa["objective"],
                questions=tuple(self.gpa["questions"]),
                hypotheses=tuple(self.gpa["hypotheses"]),
                factors=tuple(self.gpa["factors"]),
                uncertainties=tuple(self.gpa["uncertainties"]),
                kpis=tuple(self.gpa["kpis"]),
            ),
            dpa=DpaSection(
                units=tuple(self.dpa["units"]),
                blocks=tuple(self.dpa["blocks"]),
                relations=tuple(self.dpa["relations"]),
                products=tuple(self.dpa["products"]),
                decoupling_point=self.dpa["decoupling_point"],
                inventories=tuple(self.dpa["inventories"]),
            ),
            saoa=SaoaSection(
                social_structure=self.saoa["social_structure"],
                directives=tuple(self.saoa["directives"]),
                protocols=tuple(self.saoa["protocols"]),
            ),
            iaoa=IaoaSection(
                abilities=tuple(self.iaoa["abilities"]),
                responses=tuple(self.iaoa["responses"]),
            ),
            source=self.source,
        )

    def section(self, name: str) -> None:
        self.expect("PUNCT", "{")
        self.skip_newlines()
        handlers = STATEMENTS[name]
        while not self.accept("PUNCT", "}"):
            tok = self.peek()
            if tok.kind == "EOF":
                raise FmlSyntaxError(f"unclosed section {name!r}", tok.line, tok.col, "")
            if tok.kind != "IDENT":
                raise FmlSyntaxError(f"expected a statement, found {tok}", tok.line, tok.col, tok.text)
            if tok.value not in handlers:
                raise UnknownKeyword(
                    f"unknown {name} keyword {tok.value!r}", tok.line, tok.col, tok.value
                )
            self.next()
            getattr(self, f"st_{tok.value}")(tok)
            self.end_statement()
            self.skip_newlines()

    # -- gpa -------------------------------------------------------------

    def st_objective(self, kw: Token) -> None:
        self.gpa["objective"] = self.expect("STRING", what="string").value

    def st_question(self, kw: Token) -> None:
        self.gpa["questions"].append(self.expect("STRING", what="string").value)

    def st_hypothesis(self, kw: Token) -> None:
        self.gpa["hypotheses"].append(self.expect("STRING", what="string").value)

    def scalar(self):
        tok = self.peek()
        if tok.kind in ("NUMBER", "STRING", "IDENT"):
            return self.next().value
        raise FmlSyntaxError(f"expected a value, found {tok}", tok.line, tok.col, tok.text)

    def st_factor(self, kw: Token) -> None:
        name = self.ident("factor name")
        self.define("factor", name)
        target = None
        if self.accept("IDENT", "target"):
            target = self.ident("override target").value
        self.keyword("levels")
        lv = self.peek()
        levels = self.list_of(self.scalar)
        if not levels:
            raise FmlSyntaxError(f"factor {name.value!r} needs at least one level", lv.line, lv.col, "[")
        self.gpa["factors"].append(Factor(name.value, tuple(levels), target))

    def distribution(self) -> Distribution:
        tok = self.ident("distribution")
        if tok.value not in DISTRIBUTION_ARITY:
            raise UnknownKeyword(f"unknown distribution {tok.value!r}", tok.line, tok.col, tok.value)
        arity = DISTRIBUTION_ARITY[tok.value]
        if arity == 0:
            return Distribution("none")
        self.expect("PUNCT", "(")
        params = []
        while True:
            params.append(self.expect("NUMBER", what="number").value)
            if self.accept("PUNCT", ")"):
                break
            self.expect("PUNCT", ",", what="',' or ')'")
        if len(params) != arity:
            raise FmlSyntaxError(
                f"{tok.value} takes {arity} parameter(s), got {len(params)}", tok.line, tok.col, tok.value
            )
        return Distribution(tok.value, tuple(params))

    def st_uncertainty(self, kw: Token) -> None:
        name = self.ident("uncertainty name")
        self.define("uncertainty", name)
        self.gpa["uncertainties"].append(Uncertainty(name.value, self.distribution()))

    def st_kpi(self, kw: Token) -> None:
        name = self.ident("kpi name")
        self.define("kpi", name)
        self.gpa["kpis"].append(KpiRef(name.value, self.enum(Metric, "metric")))

    # -- dpa -------------------------------------------------------------

    def st_unit(self, kw: Token) -> None:
        uid = self.ident("unit id")
        self.define("unit", uid)
        name = self.expect("STRING", what="unit name").value
        self.keyword("role")
        role = self.enum(SpatialRole, "spatial role")
        self.dpa["units"].append(SpatialUnit(uid.value, name, role))

    def st_product(self, kw: Token) -> None:
        pid = self.ident("product id")
        self.define("product", pid)
        name = self.expect("STRING", what="product name").value
        self.dpa["products"].append(Product(pid.value, name))

    def label(self) -> str:
        tok = self.peek()
        if tok.kind in ("STRING", "IDENT"):
            return self.next().value
        raise FmlSyntaxError(f"expected a label, found {tok}", tok.line, tok.col, tok.text)

    def st_block(self, kw: Token) -> None:
        bid = self.ident("block id")
        self.define("block", bid)
        self.keyword("unit")
        unit = self.ident("unit id")
        self.refer("unit", unit)
        self.keyword("level")
        level = self.enum(DecisionLevel, "decision level")
        self.keyword("functions")
        ftok = self.peek()
        functions = self.list_of(lambda: self.enum(FunctionalArea, "functional area"))
        if not functions:
            raise FmlSyntaxError(f"block {bid.value!r} needs at least one function", ftok.line, ftok.col, "[")
        responsibilities: list[str] = []
        if self.accept("IDENT", "responsibilities"):
            responsibilities = self.list_of(self.label)
        functions = sorted(set(functions), key=list(FunctionalArea).index)
        self.dpa["blocks"].append(
            SupplyChainBlock(bid.value, unit.value, level, tuple(functions), tuple(responsibilities))
        )

    def st_relation(self, kw: Token) -> None:
        kind = self.enum(RelationKind, "relation kind")
        info_type = None
        if kind is RelationKind.INFORMATIONAL:
            info_type = self.enum(InfoType, "informational flow type")
        src = self.ident("block id")
        self.expect("ARROW", what="'->'")
        dst = self.ident("block id")
        self.refer("block", src)
        self.refer("block", dst)
        product = key = None
        if kind is RelationKind.PHYSICAL:
            self.keyword("product")
            ptok = self.ident("product id")
            self.refer("product", ptok)
            product = ptok.value
        elif self.accept("IDENT", "product"):
            ptok = self.ident("product id")
            self.refer("product", ptok)
            product = ptok.value
        if self.accept("IDENT", "key"):
            key = self.ident("key").value
        self.mark("relation", len(self.dpa["relations"]), kw)
        self.dpa["relations"].append(Relation(kind, src.value, dst.value, info_type, product, key))

    def st_decoupling(self, kw: Token) -> None:
        tok = self.ident("block id")
        if self.dpa["decoupling_point"] is not None:
            raise FmlSyntaxError("decoupling point declared twice", kw.line, kw.col, "decoupling")
        self.refer("block", tok)
        self.mark("decoupling", "", kw)
        self.dpa["decoupling_point"] = tok.value

    def st_inventory(self, kw: Token) -> None:
        block = self.ident("block id")
        self.refer("block", block)
        stock = self.enum(StockKind, "stock kind")
        self.keyword("initial")
        initial = self.integer("initial quantity")
        rp = rq = None
        while self.at("IDENT"):
            opt = self.next()
            if opt.value == "reorder_point" and rp is None:
                rp = self.integer("reorder point")
            elif opt.value == "reorder_qty" and rq is None:
                rq = self.integer("reorder quantity")
            else:
                raise UnknownKeyword(f"unknown inventory option {opt.value!r}", opt.line, opt.col, opt.value)
        self.mark("inventory", len(self.dpa["inventories"]), kw)
        self.dpa["inventories"].append(InventoryDecl(block.value, stock, initial, rp, rq))

    # -- saoa ------------------------------------------------------------

    def st_structure(self, kw: Token) -> None:
        if self.saoa["social_structure"] is not None:
            raise FmlSyntaxError("social structure declared twice", kw.line, kw.col, "structure")
        self.saoa["social_structure"] = self.enum(SocialStructure, "social structure")

    def block_ref(self) -> str:
        tok = self.ident("block id")
        self.refer("block", tok)
        return tok.value

    def st_merge(self, kw: Token) -> None:
        blocks = self.list_of(self.block_ref)
        if len(blocks) < 2:
            raise FmlSyntaxError("merge needs at least two blocks", kw.line, kw.col, "merge")
        self.expect("ARROW", what="'->'")
        agent = self.ident("agent name")
        self.mark("directive", len(self.saoa["directives"]), kw)
        self.saoa["directives"].append(Merge(tuple(blocks), agent.value))

    def split_part(self) -> SplitPart:
        agent = self.ident("agent name")
        spec = self.enum(Specialization, "specialization")
        key = self.ident("specialization key")
        if spec is Specialization.PRODUCT:
            self.refer("product", key)
        return SplitPart(agent.value, spec, key.value)

    def st_split(self, kw: Token) -> None:
        block = self.block_ref()
        self.expect("ARROW", what="'->'")
        lt = self.peek()
        parts = self.list_of(self.split_part)
        if not parts:
            raise FmlSyntaxError("split needs at least one part", lt.line, lt.col, "[")
        self.mark("directive", len(self.saoa["directives"]), kw)
        self.saoa["directives"].append(Split(block, tuple(parts)))

    def st_mediator(self, kw: Token) -> None:
        agent = self.ident("agent name")
        self.keyword("scope")
        scope = self.list_of(lambda: self.ident("agent name").value)
        self.mark("directive", len(self.saoa["directives"]), kw)
        self.saoa["directives"].append(Mediator(agent.value, tuple(scope)))

    def selector(self) -> Selector:
        src = self.ident("selector source")
        self.expect("ARROW", what="'->'")
        dst = self.ident("selector target")
        return Selector(src.value, dst.value)

    def st_protocol(self, kw: Token) -> None:
        name = self.ident("protocol name")
        self.define("protocol", name)
        ptype = self.enum(ProtocolType, "protocol type")
        self.keyword("bind")
        binding = self.list_of(self.selector)
        self.saoa["protocols"].append(ProtocolDecl(name.value, ptype, tuple(binding)))

    # -- iaoa ------------------------------------------------------------

    def param_value(self):
        tok = self.peek()
        if tok.kind in ("NUMBER", "STRING"):
            return self.next().value
        if tok.kind == "IDENT":
            if self.peek(1).kind == "PUNCT" and self.peek(1).value == "(":
                return self.distribution()
            if tok.value == "none":
                self.next()
                return Distribution("none")
            return self.next().value
        raise FmlSyntaxError(f"expected a parameter value, found {tok}", tok.line, tok.col, tok.text)

    def st_ability(self, kw: Token) -> None:
        sel = self.ident("agent selector")
        kind = self.enum(AbilityKind, "ability")
        allowed = ABILITY_PARAMS[kind]
        given: dict[str, object] = {}
        if self.accept("PUNCT", "("):
            while not self.accept("PUNCT", ")"):
                name = self.ident("parameter name")
                if name.value not in allowed:
                    raise UnknownKeyword(
                        f"{kind.value} has no parameter {name.value!r}", name.line, name.col, name.value
                    )
                if name.value in given:
                    raise FmlSyntaxError(
                        f"parameter {name.value!r} given twice", name.line, name.col, name.value
                    )
                self.expect("PUNCT", "=")
                given[name.value] = self.param_value()
                if not self.at("PUNCT", ")"):
                    self.expect("PUNCT", ",", what="',' or ')'")
        params = tuple((k, given[k]) for k in allowed if k in given)
        self.mark("ability", len(self.iaoa["abilities"]), kw)
        self.iaoa["abilities"].append(AbilityDecl(sel.value, kind, params))

    def st_rule(self, kw: Token) -> None:
        sel = self.ident("agent selector")
        self.keyword("when")
        qty = self.ident("monitored quantity")
        if qty.value not in QUANTITIES:
            raise UnknownKeyword(f"unknown quantity {qty.value!r}", qty.line, qty.col, qty.value)
        op = self.expect("OP", what="comparison operator")
        if op.value not in COMPARATORS:
            raise FmlSyntaxError(f"bad comparator {op.value!r}", op.line, op.col, op.text)
        threshold = self.expect("NUMBER", what="threshold").value
        self.keyword("do")
        action = self.enum(AbilityKind, "ability")
        self.mark("rule", len(self.iaoa["responses"]), kw)
        self.iaoa["responses"].append(ResponseRule(sel.value, qty.value, op.value, threshold, action))

    # -- identifier checks -------------------------------------------------

    def check_identifiers(self) -> None:
        errors: list[FmlError] = []
        seen: set[tuple[str, str]] = set()
        for ns, sym, tok in self.defs:
            if (ns, sym) in seen:
                errors.append(DuplicateId(f"duplicate {ns} id {sym!r}", tok.line, tok.col, sym))
            seen.add((ns, sym))
        for ns, sym, tok in self.refs:
            if (ns, sym) not in seen:
                errors.append(DanglingReference(f"undeclared {ns} {sym!r}", tok.line, tok.col, sym))
        if errors:
            errors.sort(key=lambda e: (e.line, e.col))
            first = errors[0]
            first.errors = errors
            raise first
