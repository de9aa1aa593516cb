//! OpenAPI 3 description of the REST API; `docs/openapi.json` is this
//! document pretty-printed.

use serde_json::{json, Value};

fn err(desc: &str) -> Value {
    json!({ "description": desc, "content": { "application/json": { "schema": { "$ref": "#/components/schemas/Error" } } } })
}

fn ok(desc: &str, schema: Value) -> Value {
    json!({ "description": desc, "content": { "application/json": { "schema": schema } } })
}

fn r(name: &str) -> Value {
    json!({ "$ref": format!("#/components/schemas/{name}") })
}

fn path_id(name: &str) -> Value {
    json!({ "name": name, "in": "path", "required": true, "schema": { "type": "string" } })
}

fn token() -> Value {
    json!([{ "bearerToken": [] }])
}

pub fn document() -> Value {
    let color = json!({ "type": "string", "enum": ["green", "yellow", "neutral", "red"] });
    let group = json!({ "type": "string", "enum": ["NoTrack", "Attacks", "EncWeb", "EncMail"] });
    let outcome = json!({ "type": "string", "enum": ["pass", "fail", "neutral", "error"] });
    let group_colors = json!({ "type": "object", "additionalProperties": color });
    json!({
        "openapi": "3.0.3",
        "info": {
            "title": "sitebench API",
            "version": "1.0.0",
            "description": "Crowd-sourced site lists, privacy and security scan results, rankings and open-data export."
        },
        "servers": [{ "url": "/" }],
        "components": {
            "securitySchemes": {
                "bearerToken": { "type": "http", "scheme": "bearer", "description": "List access token returned once at creation." }
            },
            "schemas": {
                "Error": { "type": "object", "properties": { "error": { "type": "string" } }, "required": ["error"] },
                "Color": color,
                "CheckGroup": group,
                "Outcome": outcome,
                "SiteInput": {
                    "oneOf": [
                        { "type": "string", "description": "Site URL" },
                        { "type": "object", "properties": {
                            "url": { "type": "string" },
                            "properties": { "type": "object", "additionalProperties": { "type": "string", "nullable": true } }
                        }, "required": ["url"] }
                    ]
                },
                "CreateList": {
                    "type": "object",
                    "required": ["title", "sites"],
                    "properties": {
                        "title": { "type": "string" },
                        "description": { "type": "string" },
                        "tags": { "type": "array", "items": { "type": "string" } },
                        "sites": { "type": "array", "items": r("SiteInput") },
                        "property_schema": { "type": "array", "items": { "type": "string" } },
                        "private": { "type": "boolean", "default": false },
                        "rescan": { "type": "boolean", "default": true },
                        "honor_robots": { "type": "boolean", "default": false }
                    }
                },
                "Created": {
                    "type": "object",
                    "properties": {
                        "list_id": { "type": "string" },
                        "token": { "type": "string", "description": "43-character base64url secret, shown only here" },
                        "site_ids": { "type": "array", "items": { "type": "string" } },
                        "property_schema": { "type": "array", "items": { "type": "string" } },
                        "jobs": { "type": "array", "items": { "type": "string" } }
                    }
                },
                "UpdateList": {
                    "type": "object",
                    "properties": {
                        "title": { "type": "string" },
                        "description": { "type": "string" },
                        "tags": { "type": "array", "items": { "type": "string" } },
                        "private": { "type": "boolean" },
                        "rescan": { "type": "boolean" },
                        "honor_robots": { "type": "boolean" },
                        "sites": { "type": "array", "items": r("SiteInput") },
                        "property_schema": { "type": "array", "items": { "type": "string" } }
                    }
                },
                "Site": {
                    "type": "object",
                    "properties": {
                        "id": { "type": "string" },
                        "list_id": { "type": "string", "nullable": true },
                        "url": { "type": "string" },
                        "final_url": { "type": "string", "nullable": true },
                        "properties": { "type": "object", "additionalProperties": { "type": "string", "nullable": true } }
                    }
                },
                "List": {
                    "type": "object",
                    "properties": {
                        "id": { "type": "string" },
                        "title": { "type": "string" },
                        "description": { "type": "string" },
                        "tags": { "type": "array", "items": { "type": "string" } },
                        "property_schema": { "type": "array", "items": { "type": "string" } },
                        "private": { "type": "boolean" },
                        "rescan_enabled": { "type": "boolean" },
                        "honor_robots": { "type": "boolean" },
                        "created_at": { "type": "string", "format": "date-time" },
                        "sites": { "type": "array", "items": r("Site") }
                    }
                },
                "ListPage": {
                    "type": "object",
                    "properties": {
                        "total": { "type": "integer" },
                        "limit": { "type": "integer" },
                        "offset": { "type": "integer" },
                        "items": { "type": "array", "items": { "type": "object" } }
                    }
                },
                "RankingRow": {
                    "type": "object",
                    "properties": {
                        "site_id": { "type": "string" },
                        "url": { "type": "string" },
                        "final_url": { "type": "string", "nullable": true },
                        "properties": { "type": "object" },
                        "scanned": { "type": "boolean" },
                        "group_ratings": group_colors,
                        "overall": { "allOf": [r("Color")], "nullable": true },
                        "run_id": { "type": "string", "nullable": true },
                        "scanned_at": { "type": "string", "format": "date-time", "nullable": true }
                    }
                },
                "Ranking": {
                    "type": "object",
                    "properties": {
                        "list_id": { "type": "string" },
                        "order": { "type": "array", "items": r("CheckGroup"), "minItems": 4, "maxItems": 4 },
                        "rows": { "type": "array", "items": r("RankingRow") }
                    }
                },
                "CheckDetail": {
                    "type": "object",
                    "properties": {
                        "check_id": { "type": "string" },
                        "group": r("CheckGroup"),
                        "outcome": r("Outcome"),
                        "critical": { "type": "boolean" },
                        "evidence": { "type": "string" },
                        "documentation_key": { "type": "string" },
                        "description": { "type": "string" }
                    }
                },
                "RunSummary": {
                    "type": "object",
                    "properties": {
                        "run_id": { "type": "string" },
                        "status": { "type": "string", "enum": ["queued", "running", "done", "failed", "blacklisted"] },
                        "started_at": { "type": "string", "format": "date-time" },
                        "finished_at": { "type": "string", "format": "date-time", "nullable": true },
                        "note": { "type": "string" }
                    }
                },
                "SiteResults": {
                    "type": "object",
                    "properties": {
                        "site_id": { "type": "string" },
                        "url": { "type": "string" },
                        "final_url": { "type": "string", "nullable": true },
                        "run": { "allOf": [r("RunSummary")], "nullable": true },
                        "group_ratings": group_colors,
                        "overall": { "allOf": [r("Color")], "nullable": true },
                        "checks": { "type": "array", "items": r("CheckDetail") },
                        "facts": { "type": "object", "nullable": true },
                        "history": { "type": "array", "items": r("RunSummary") },
                        "blacklisted": { "type": "boolean" },
                        "annotation": { "type": "string" }
                    }
                },
                "ExportDoc": {
                    "type": "object",
                    "required": ["format", "list", "catalog", "sites", "ranking"],
                    "properties": {
                        "format": { "type": "string", "enum": [crate::views::EXPORT_FORMAT] },
                        "list": { "type": "object" },
                        "catalog": { "type": "array", "items": { "type": "string" } },
                        "sites": { "type": "array", "items": { "type": "object" } },
                        "ranking": r("Ranking")
                    }
                }
            }
        },
        "paths": {
            "/api/v1/lists": {
                "post": {
                    "summary": "Create a site list from JSON, or from CSV (text/csv body, metadata in query)",
                    "requestBody": { "content": {
                        "application/json": { "schema": r("CreateList") },
                        "text/csv": { "schema": { "type": "string", "description": "First column url, further columns are properties" } }
                    } },
                    "responses": { "201": ok("Created", r("Created")), "400": err("Malformed URL, JSON or CSV"), "422": err("No sites") }
                },
                "get": {
                    "summary": "Search public lists",
                    "parameters": [
                        { "name": "q", "in": "query", "schema": { "type": "string" } },
                        { "name": "tag", "in": "query", "schema": { "type": "string" } },
                        { "name": "limit", "in": "query", "schema": { "type": "integer", "default": 50 } },
                        { "name": "offset", "in": "query", "schema": { "type": "integer", "default": 0 } }
                    ],
                    "responses": { "200": ok("Page of lists", r("ListPage")) }
                }
            },
            "/api/v1/lists/{id}": {
                "parameters": [path_id("id")],
                "get": { "summary": "List detail", "responses": { "200": ok("List", r("List")), "403": err("Private list"), "404": err("Unknown list") } },
                "put": {
                    "summary": "Update a list", "security": token(),
                    "requestBody": { "content": { "application/json": { "schema": r("UpdateList") } } },
                    "responses": { "200": ok("Updated list", r("List")), "400": err("Malformed body"), "403": err("Bad token"), "404": err("Unknown list") }
                },
                "delete": {
                    "summary": "Delete a list with its sites, runs and token", "security": token(),
                    "responses": { "204": { "description": "Deleted" }, "403": err("Bad token"), "404": err("Unknown list") }
                }
            },
            "/api/v1/lists/{id}/ranking": {
                "parameters": [path_id("id"), { "name": "order", "in": "query", "schema": { "type": "string", "example": "EncWeb,NoTrack,Attacks,EncMail" } }],
                "get": { "summary": "Ranked rows under a group priority order", "responses": { "200": ok("Ranking", r("Ranking")), "400": err("Order is not a permutation"), "403": err("Private list"), "404": err("Unknown list") } }
            },
            "/api/v1/lists/{id}/stats": {
                "parameters": [path_id("id")],
                "get": { "summary": "Color counts per group", "responses": { "200": ok("Stats", json!({ "type": "object" })), "403": err("Private list"), "404": err("Unknown list") } }
            },
            "/api/v1/lists/{id}/scan": {
                "parameters": [path_id("id")],
                "post": { "summary": "Queue a scan of every site", "security": token(), "responses": { "202": ok("Jobs", json!({ "type": "object" })), "403": err("Bad token"), "404": err("Unknown list") } }
            },
            "/api/v1/sites/{id}/results": {
                "parameters": [path_id("id")],
                "get": { "summary": "Latest check results and run history", "responses": { "200": ok("Results", r("SiteResults")), "403": err("Private list"), "404": err("Unknown site") } }
            },
            "/api/v1/runs/{id}": {
                "parameters": [path_id("id")],
                "get": { "summary": "One scan run", "responses": { "200": ok("Run", json!({ "type": "object" })), "404": err("Unknown run") } }
            },
            "/api/v1/export/lists/{file}": {
                "parameters": [{ "name": "file", "in": "path", "required": true, "schema": { "type": "string" }, "description": "<list id>.json or <list id>.csv" }],
                "get": {
                    "summary": "Open-data export",
                    "responses": {
                        "200": { "description": "Export", "content": { "application/json": { "schema": r("ExportDoc") }, "text/csv": { "schema": { "type": "string" } } } },
                        "403": err("Private list without token"), "404": err("Unknown list")
                    }
                }
            },
            "/api/v1/import": {
                "post": {
                    "summary": "Recreate a list with latest results from an export document",
                    "requestBody": { "content": { "application/json": { "schema": r("ExportDoc") } } },
                    "responses": { "201": ok("Created", r("Created")), "400": err("Malformed document"), "422": err("No sites") }
                }
            },
            "/api/v1/scan": {
                "post": {
                    "summary": "One-off single-site scan (unlisted)",
                    "requestBody": { "content": { "application/json": { "schema": { "type": "object", "required": ["url"], "properties": { "url": { "type": "string" } } } } } },
                    "responses": { "202": ok("Queued", json!({ "type": "object" })), "200": ok("Site opted out; nothing queued", json!({ "type": "object" })), "400": err("Malformed URL"), "429": err("Host scanned too recently") }
                }
            },
            "/api/v1/checks": {
                "get": { "summary": "The check catalog", "responses": { "200": ok("Catalog", json!({ "type": "object" })) } }
            }
        }
    })
}

pub fn pretty() -> String {
    serde_json::to_string_pretty(&document()).expect("static document") + "\n"
}
