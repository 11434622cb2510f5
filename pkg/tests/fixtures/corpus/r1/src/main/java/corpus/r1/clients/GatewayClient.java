package corpus.r1.clients;

import javax.ws.rs.client.Client;

public class GatewayClient {

    private final Client client;
    private final String base;

    public GatewayClient(String base) {
        this.client = new Client(); // +R1
        this.base = base;
    }

    public String fetch(String resource) {
        return client.target(base + "/" + resource).request().get(String.class);
    }
}
