package corpus.r4.net;

import java.io.IOException;
import java.net.Socket;
import java.util.ArrayList;
import java.util.List;

public final class Prober {

    private static final int[] PORTS = {80, 443};

    private Prober() {
    }

    public static int probeAll(List<String> hosts) {
        List<Socket> open = new ArrayList<>();
        List<String> names = new ArrayList<>();
        for (String host : hosts) {
            names.add(host.trim()); // -R4 loop without an interaction
            for (int port : PORTS) {
                try {
                    open.add(new Socket(host, port)); // +R4
                } catch (IOException e) {
                    names.remove(host);
                }
            }
        }
        /* for (String h : hosts) { new Socket(h, 22); } -R4 commented out */
        return open.size() + names.size();
    }
}
